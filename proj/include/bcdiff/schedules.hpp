#pragma once

#include <string>
#include <vector>

namespace bcdiff {

enum class ScheduleKind { vp, ve, ot };

ScheduleKind schedule_kind_from_string(const std::string& s);
const char* to_string(ScheduleKind kind);

struct Coeff {
    double u;
    double v;
};

struct InvertedTime {
    double t;
    bool clamped;
};

// Flow coefficients of the deterministic noising map x_t = u_t x0 + v_t eps
// on the integer grid t = 0..T.
//
//   vp: u_t = sqrt(prod_{i<=t}(1 - beta_i)), v_t = sqrt(1 - u_t^2),
//       beta linear from beta_min to beta_max over steps 1..T, u_0 = 1
//   ve: u_t = 1, v_t = sigma0 * (sigmaT/sigma0)^(t/T)
//   ot: u_t = 1 - t/T, v_t = t/T
//
// Real-valued times appear wherever trajectories are rescaled; ve and ot
// evaluate their closed forms directly, vp interpolates its table linearly in
// u (with v = sqrt(1 - u^2), preserving u^2 + v^2 = 1) and returns exact
// table entries at integer times.
class Schedule {
public:
    static Schedule vp(int T, double beta_min = 1e-4, double beta_max = 2e-2);
    static Schedule ve(int T, double sigma0 = 0.01, double sigmaT = 50.0);
    static Schedule ot(int T);

    ScheduleKind kind() const { return kind_; }
    int T() const { return T_; }
    double sigma0() const { return sigma0_; }
    double sigmaT() const { return sigmaT_; }

    // Grid coefficients; throws std::out_of_range outside 0..T.
    Coeff coeff(int t) const;

    // Real-time coefficients; the argument is clamped to [0, T].
    Coeff coeff_at(double t) const;

    // (du/dt, dv/dt) at a real time; vp uses table differences.
    Coeff derivative_at(double t) const;

    // Inverts the noise-determining coefficient back to a time: u for vp
    // (counting rule over the table: the number of grid indices whose u
    // exceeds the target) and ot, v for ve. Targets outside the schedule's
    // range clamp to the nearest endpoint and set .clamped.
    InvertedTime time_from_u(double target) const;

    // vp only: the sqrt-cumulative-alpha table u_0..u_T (empty otherwise).
    const std::vector<double>& u_table() const { return u_; }

private:
    Schedule(ScheduleKind kind, int T);

    ScheduleKind kind_;
    int T_;
    double sigma0_ = 0.0;
    double sigmaT_ = 0.0;
    std::vector<double> u_;  // vp: sqrt(alpha_bar_t)
    std::vector<double> v_;  // vp: sqrt(1 - alpha_bar_t)
};

}  // namespace bcdiff
