#include "aal/theory.hpp"

#include "aal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace aal::theory {

namespace {

constexpr double kMassTolerance = 1e-12;

// x·log(x/y) with 0·log(0/y) = 0.
double xlogxy(double x, double y) {
    if (x == 0.0) return 0.0;
    return x * std::log(x / y);
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

void DiscreteJoint::validate() const {
    const std::size_t n = mass_s.size();
    if (mass_t.size() != n || w.size() != n) {
        throw ContractError("DiscreteJoint: mass_s, mass_t and w must have equal length");
    }
    if (!support.empty() && support.size() != n) {
        throw ContractError("DiscreteJoint: support length differs from mass length");
    }
    double ss = 0.0;
    double st = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(mass_s[i] >= 0.0) || !(mass_t[i] >= 0.0)) throw ContractError("DiscreteJoint: negative mass");
        if (!(w[i] >= 0.0)) throw ContractError("DiscreteJoint: negative weight");
        ss += mass_s[i];
        st += mass_t[i];
    }
    if (std::abs(ss - 1.0) > kMassTolerance || std::abs(st - 1.0) > kMassTolerance) {
        throw ContractError("DiscreteJoint: masses must each sum to 1");
    }
}

double DiscreteJoint::weighted_target_mass() const {
    double total = 0.0;
    for (std::size_t i = 0; i < size(); ++i) total += w[i] * mass_t[i];
    return total;
}

DiscreteJoint make_joint(std::vector<double> mass_s, std::vector<double> mass_t) {
    DiscreteJoint j;
    j.w.assign(mass_s.size(), 1.0);
    j.mass_s = std::move(mass_s);
    j.mass_t = std::move(mass_t);
    j.validate();
    return j;
}

std::vector<double> weights_from_unknown_probs(std::span<const double> w_unknown, std::span<const double> mass_t) {
    if (w_unknown.size() != mass_t.size()) {
        throw ContractError("weights_from_unknown_probs: length mismatch");
    }
    std::vector<double> w(w_unknown.size());
    double raw_sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!(w_unknown[i] >= 0.0 && w_unknown[i] <= 1.0)) {
            throw ContractError("weights_from_unknown_probs: probability outside [0,1]");
        }
        w[i] = 1.0 - w_unknown[i];
        raw_sum += w[i];
    }
    if (raw_sum <= 1e-12) std::fill(w.begin(), w.end(), 1.0);
    double avg = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) avg += w[i] * mass_t[i];
    if (avg > 0.0) {
        for (double& v : w) v /= avg;
    }
    return w;
}

OptimalD optimal_d(const DiscreteJoint& j) {
    OptimalD out;
    out.d.resize(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        const double denom = j.mass_s[i] + j.w[i] * j.mass_t[i];
        if (denom > 0.0) {
            out.d[i] = j.mass_s[i] / denom;
        } else {
            out.undefined_points.push_back(i);
        }
    }
    return out;
}

double value(const DiscreteJoint& j, std::span<const double> d) {
    if (d.size() != j.size()) throw ContractError("value: one discriminator output per point required");
    double v = 0.0;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const double a = j.mass_s[i];
        const double b = j.w[i] * j.mass_t[i];
        if (a != 0.0) v += a * std::log(d[i]);
        if (b != 0.0) v += b * std::log1p(-d[i]);
    }
    return v;
}

double kl(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ContractError("kl: supports differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0) || !(q[i] >= 0.0)) throw ContractError("kl: negative mass");
        total += xlogxy(p[i], q[i]);
    }
    return total;
}

double jsd(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ContractError("jsd: supports differ in length");
    std::vector<double> m(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0) || !(q[i] >= 0.0)) throw ContractError("jsd: negative mass");
        m[i] = 0.5 * (p[i] + q[i]);
    }
    return 0.5 * kl(p, m) + 0.5 * kl(q, m);
}

OptimumValue value_at_optimum(const DiscreteJoint& j) {
    const OptimalD opt = optimal_d(j);
    if (!opt.undefined_points.empty()) {
        throw ContractError("value_at_optimum: D* undefined at " + std::to_string(opt.undefined_points.size()) +
                            " point(s) where s + W t = 0");
    }
    std::vector<double> d(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) d[i] = *opt.d[i];
    std::vector<double> weighted_t(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) weighted_t[i] = j.w[i] * j.mass_t[i];

    OptimumValue out;
    out.direct = value(j, d);
    out.jsd = jsd(j.mass_s, weighted_t);
    out.jsd_form = -std::log(4.0) + 2.0 * out.jsd;
    out.gap = out.direct - out.jsd_form;
    return out;
}

NumericOptimumReport verify_optimum_numerically(const DiscreteJoint& j, std::size_t steps, double lr) {
    if (steps == 0) throw ContractError("verify_optimum_numerically: steps must be positive");
    NumericOptimumReport rep;
    const std::size_t n = j.size();
    std::vector<double> z(n, 0.0);
    for (std::size_t step = 0; step < steps; ++step) {
        for (std::size_t i = 0; i < n; ++i) {
            const double sig = sigmoid(z[i]);
            // dV/dz = s(1 − D) − W t D
            z[i] += lr * (j.mass_s[i] * (1.0 - sig) - j.w[i] * j.mass_t[i] * sig);
        }
    }
    rep.d_learned.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        rep.d_learned[i] = sigmoid(z[i]);
        if (!std::isfinite(z[i])) rep.diverged = true;
    }
    if (rep.diverged) {
        rep.message = "non-finite logit during ascent";
        return rep;
    }
    const OptimalD opt = optimal_d(j);
    std::vector<double> d_star(n, 0.5);
    for (std::size_t i = 0; i < n; ++i) {
        if (!opt.d[i]) continue;
        d_star[i] = *opt.d[i];
        rep.max_abs_d_deviation = std::max(rep.max_abs_d_deviation, std::abs(rep.d_learned[i] - d_star[i]));
    }
    rep.value_learned = value(j, rep.d_learned);
    rep.value_optimal = value(j, d_star);
    rep.abs_value_deviation = std::abs(rep.value_learned - rep.value_optimal);
    if (!std::isfinite(rep.value_learned)) {
        rep.diverged = true;
        rep.message = "non-finite value at learned discriminator";
    }
    return rep;
}

DiscreteJoint random_joint(std::size_t n, bool weighted, std::mt19937_64& rng, double mass_floor) {
    std::uniform_real_distribution<double> mass(mass_floor, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto normalized = [&]() {
        std::vector<double> v(n);
        double total = 0.0;
        for (double& x : v) total += (x = mass(rng));
        for (double& x : v) x /= total;
        return v;
    };
    DiscreteJoint j;
    j.mass_s = normalized();
    j.mass_t = normalized();
    j.w.assign(n, 1.0);
    if (weighted) {
        std::vector<double> wu(n);
        for (double& x : wu) x = unit(rng);
        j.w = weights_from_unknown_probs(wu, j.mass_t);
    }
    j.validate();
    return j;
}

std::vector<TrialRecord> run_trials(const TrialSettings& settings) {
    std::mt19937_64 rng(settings.seed);
    std::vector<TrialRecord> out;
    out.reserve(settings.trials);
    for (std::size_t t = 0; t < settings.trials; ++t) {
        const DiscreteJoint j = random_joint(settings.points, settings.weighted, rng);
        const NumericOptimumReport rep = verify_optimum_numerically(j, settings.steps, settings.lr);
        const OptimumValue ov = value_at_optimum(j);
        TrialRecord r;
        r.trial = t;
        r.weighted = settings.weighted;
        r.max_abs_d_deviation = rep.max_abs_d_deviation;
        r.abs_value_deviation = rep.abs_value_deviation;
        r.value_direct = ov.direct;
        r.value_jsd_form = ov.jsd_form;
        r.identity_error = std::abs(ov.direct - ov.jsd_form);
        r.jsd = ov.jsd;
        r.jsd_negative = ov.jsd < 0.0;
        r.diverged = rep.diverged;
        out.push_back(r);
    }
    return out;
}

} // namespace aal::theory
