#include "bcdiff/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bcdiff {

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "vp") return ScheduleKind::vp;
    if (s == "ve") return ScheduleKind::ve;
    if (s == "ot") return ScheduleKind::ot;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

const char* to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::vp: return "vp";
        case ScheduleKind::ve: return "ve";
        case ScheduleKind::ot: return "ot";
    }
    return "?";
}

Schedule::Schedule(ScheduleKind kind, int T) : kind_(kind), T_(T) {
    if (T < 2) throw std::invalid_argument("schedule needs T >= 2");
}

Schedule Schedule::vp(int T, double beta_min, double beta_max) {
    Schedule s(ScheduleKind::vp, T);
    if (!(beta_min > 0.0) || !(beta_max < 1.0) || !(beta_min <= beta_max))
        throw std::invalid_argument("vp needs 0 < beta_min <= beta_max < 1");
    s.u_.resize(T + 1);
    s.v_.resize(T + 1);
    double alpha_bar = 1.0;
    s.u_[0] = 1.0;
    s.v_[0] = 0.0;
    for (int t = 1; t <= T; ++t) {
        double beta = beta_min + (beta_max - beta_min) * double(t - 1) / double(T - 1);
        alpha_bar *= 1.0 - beta;
        s.u_[t] = std::sqrt(alpha_bar);
        s.v_[t] = std::sqrt(1.0 - alpha_bar);
    }
    return s;
}

Schedule Schedule::ve(int T, double sigma0, double sigmaT) {
    Schedule s(ScheduleKind::ve, T);
    if (!(sigma0 > 0.0) || !(sigma0 < sigmaT))
        throw std::invalid_argument("ve needs 0 < sigma0 < sigmaT");
    s.sigma0_ = sigma0;
    s.sigmaT_ = sigmaT;
    return s;
}

Schedule Schedule::ot(int T) { return Schedule(ScheduleKind::ot, T); }

Coeff Schedule::coeff(int t) const {
    if (t < 0 || t > T_) throw std::out_of_range("schedule time outside 0..T");
    switch (kind_) {
        case ScheduleKind::vp: return {u_[t], v_[t]};
        case ScheduleKind::ve: {
            if (t == 0) return {1.0, sigma0_};
            if (t == T_) return {1.0, sigmaT_};
            return {1.0, sigma0_ * std::pow(sigmaT_ / sigma0_, double(t) / double(T_))};
        }
        case ScheduleKind::ot: {
            double frac = double(t) / double(T_);
            return {1.0 - frac, frac};
        }
    }
    throw std::logic_error("unreachable");
}

Coeff Schedule::coeff_at(double t) const {
    if (t <= 0.0) return coeff(0);
    if (t >= double(T_)) return coeff(T_);
    switch (kind_) {
        case ScheduleKind::vp: {
            double fl = std::floor(t);
            int k = int(fl);
            double frac = t - fl;
            if (frac == 0.0) return {u_[k], v_[k]};
            double u = u_[k] + frac * (u_[k + 1] - u_[k]);
            return {u, std::sqrt(1.0 - u * u)};
        }
        case ScheduleKind::ve:
            return {1.0, sigma0_ * std::pow(sigmaT_ / sigma0_, t / double(T_))};
        case ScheduleKind::ot:
            return {1.0 - t / double(T_), t / double(T_)};
    }
    throw std::logic_error("unreachable");
}

Coeff Schedule::derivative_at(double t) const {
    switch (kind_) {
        case ScheduleKind::ot:
            return {-1.0 / double(T_), 1.0 / double(T_)};
        case ScheduleKind::ve: {
            double v = coeff_at(t).v;
            return {0.0, v * std::log(sigmaT_ / sigma0_) / double(T_)};
        }
        case ScheduleKind::vp: {
            double tc = std::clamp(t, 0.0, double(T_));
            double fl = std::floor(tc);
            int k = int(fl);
            double du;
            if (tc > fl && k < T_) {
                du = u_[k + 1] - u_[k];  // slope of the interpolation segment
            } else {
                int lo = std::max(0, k - 1);
                int hi = std::min(T_, k + 1);
                du = (u_[hi] - u_[lo]) / double(hi - lo);
            }
            Coeff c = coeff_at(tc);
            if (c.v > 1e-12) return {du, -c.u * du / c.v};
            // Near t = 0 the v branch of the sqrt is singular; fall back to
            // the same difference stencil on v.
            int lo = std::max(0, k - 1);
            int hi = std::min(T_, k + 1);
            return {du, (v_[hi] - v_[lo]) / double(hi - lo)};
        }
    }
    throw std::logic_error("unreachable");
}

InvertedTime Schedule::time_from_u(double target) const {
    switch (kind_) {
        case ScheduleKind::ot: {
            double t = double(T_) * (1.0 - target);
            if (t < 0.0) return {0.0, true};
            if (t > double(T_)) return {double(T_), true};
            return {t, false};
        }
        case ScheduleKind::ve: {
            // Inversion runs on v for this kind; u is identically 1.
            if (target <= sigma0_) return {0.0, target < sigma0_};
            if (target >= sigmaT_) return {double(T_), target > sigmaT_};
            double t = double(T_) * (std::log(target) - std::log(sigma0_)) /
                       (std::log(sigmaT_) - std::log(sigma0_));
            return {std::clamp(t, 0.0, double(T_)), false};
        }
        case ScheduleKind::vp: {
            // Counting rule: how many grid entries still sit above the target.
            // The table is strictly decreasing, so this is the first index
            // whose u falls to or below the target.
            if (target > 1.0) return {0.0, true};
            if (target < u_[T_]) return {double(T_), true};
            auto it = std::partition_point(u_.begin(), u_.end(),
                                           [&](double entry) { return entry > target; });
            double count = double(it - u_.begin());
            return {count, false};
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace bcdiff
