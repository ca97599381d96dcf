#include "darcynas/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "darcynas/common.hpp"

namespace darcynas {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

/// Minimizer of the cubic through (x1, f1, g1) and (x2, f2, g2), clamped to
/// [lo, hi]; falls back to bisection when the cubic has no real minimizer.
double cubic_interpolate(double x1, double f1, double g1, double x2, double f2, double g2, double lo, double hi) {
    const double d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    const double d2_sq = d1 * d1 - g1 * g2;
    if (d2_sq >= 0.0) {
        const double d2 = std::sqrt(d2_sq);
        const double t = x1 <= x2 ? x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
                                  : x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2));
        if (std::isfinite(t)) return std::clamp(t, lo, hi);
    }
    return 0.5 * (lo + hi);
}

struct Probe {
    double t = 0.0;
    double f = 0.0;
    double gtd = 0.0;
    std::vector<double> g;
};

}  // namespace

Adam::Adam(std::size_t n, AdamOptions opts) : opts_(opts), m_(n, 0.0), v_(n, 0.0) {
    if (!(opts_.lr > 0.0)) throw DomainError("Adam learning rate must be positive");
}

void Adam::step(std::vector<double>& x, const std::vector<double>& g) {
    if (x.size() != m_.size() || g.size() != m_.size()) throw DomainError("Adam: size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, t_);
    const double bc2 = 1.0 - std::pow(opts_.beta2, t_);
    for (std::size_t i = 0; i < x.size(); ++i) {
        m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * g[i];
        v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * g[i] * g[i];
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        x[i] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
}

std::string to_string(LbfgsStatus s) {
    switch (s) {
        case LbfgsStatus::MaxIterations: return "max_iterations";
        case LbfgsStatus::Converged: return "converged";
        case LbfgsStatus::SmallGradient: return "small_gradient";
        case LbfgsStatus::LineSearchFailed: return "line_search_failed";
    }
    return "?";
}

LineSearchResult strong_wolfe(const Objective& fn, const std::vector<double>& x, double t0, const std::vector<double>& d,
                              double f0, const std::vector<double>& g0, const LbfgsOptions& opts) {
    const double gtd0 = dot(g0, d);
    const double d_norm = max_abs(d);
    LineSearchResult out;
    std::vector<double> xt(x.size());

    auto eval = [&](double t) {
        Probe p;
        p.t = t;
        p.g.assign(x.size(), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) xt[i] = x[i] + t * d[i];
        p.f = fn(xt, p.g);
        p.gtd = dot(p.g, d);
        ++out.evaluations;
        return p;
    };

    Probe prev{0.0, f0, gtd0, g0};
    Probe cur = eval(t0);
    bool done = false;
    Probe lo, hi;
    bool bracketed = false;

    while (true) {
        if (!std::isfinite(cur.f) || cur.f > f0 + opts.c1 * cur.t * gtd0 ||
            (out.evaluations > 1 && cur.f >= prev.f)) {
            lo = prev;
            hi = cur;
            bracketed = true;
            break;
        }
        if (std::abs(cur.gtd) <= -opts.c2 * gtd0) {
            lo = cur;
            done = true;
            break;
        }
        if (cur.gtd >= 0.0) {
            lo = cur;
            hi = prev;
            bracketed = true;
            break;
        }
        if (out.evaluations >= opts.max_line_search) {
            lo = cur;
            break;
        }
        const double min_step = cur.t + 0.01 * (cur.t - prev.t);
        const double max_step = cur.t * 10.0;
        const double t = cubic_interpolate(prev.t, prev.f, prev.gtd, cur.t, cur.f, cur.gtd, min_step, max_step);
        prev = std::move(cur);
        cur = eval(t);
    }

    // Zoom: `lo` always satisfies sufficient decrease and has the lower value.
    if (bracketed && !done) {
        if (!(lo.f <= hi.f) && std::isfinite(hi.f)) std::swap(lo, hi);
        bool insufficient = false;
        while (out.evaluations < opts.max_line_search) {
            const double a = std::min(lo.t, hi.t);
            const double b = std::max(lo.t, hi.t);
            if ((b - a) * d_norm < 1e-12) break;
            double t = std::isfinite(hi.f) ? cubic_interpolate(lo.t, lo.f, lo.gtd, hi.t, hi.f, hi.gtd, a, b)
                                           : 0.5 * (a + b);
            const double eps = 0.1 * (b - a);
            if (std::min(b - t, t - a) < eps) {
                if (insufficient || t >= b || t <= a) {
                    t = std::abs(t - b) < std::abs(t - a) ? b - eps : a + eps;
                    insufficient = false;
                } else {
                    insufficient = true;
                }
            } else {
                insufficient = false;
            }
            Probe p = eval(t);
            if (!std::isfinite(p.f) || p.f > f0 + opts.c1 * p.t * gtd0 || p.f >= lo.f) {
                hi = std::move(p);
            } else {
                if (std::abs(p.gtd) <= -opts.c2 * gtd0) {
                    lo = std::move(p);
                    done = true;
                    break;
                }
                if (p.gtd * (hi.t - lo.t) >= 0.0) hi = lo;
                lo = std::move(p);
            }
        }
    }

    out.t = lo.t;
    out.f = lo.f;
    out.g = std::move(lo.g);
    out.ok = lo.t > 0.0 && std::isfinite(lo.f) && lo.f < f0;
    return out;
}

LbfgsResult lbfgs(const Objective& fn, std::vector<double> x0, const LbfgsOptions& opts,
                  const IterationCallback& on_iter) {
    if (opts.memory < 1 || opts.max_line_search < 1) throw DomainError("L-BFGS: memory and maxls must be >= 1");
    LbfgsResult res;
    res.x = std::move(x0);
    const std::size_t n = res.x.size();
    std::vector<double> g(n, 0.0);
    res.f = fn(res.x, g);
    res.evaluations = 1;
    if (!std::isfinite(res.f)) throw NumericError("L-BFGS: initial loss is not finite");
    if (max_abs(g) <= opts.grad_tolerance) {
        res.status = LbfgsStatus::SmallGradient;
        return res;
    }

    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho;
    std::vector<double> d(n), alpha;

    for (int it = 1; it <= opts.max_iters; ++it) {
        // Two-loop recursion: d = -H g.
        for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
        const std::size_t m = s_hist.size();
        alpha.assign(m, 0.0);
        for (std::size_t k = m; k-- > 0;) {
            alpha[k] = rho[k] * dot(s_hist[k], d);
            for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * y_hist[k][i];
        }
        if (m > 0) {
            const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
            for (double& v : d) v *= gamma;
        }
        for (std::size_t k = 0; k < m; ++k) {
            const double beta = rho[k] * dot(y_hist[k], d);
            for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[k] - beta) * s_hist[k][i];
        }

        double gtd = dot(g, d);
        if (!(gtd < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            rho.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            gtd = dot(g, d);
        }
        double t0 = 1.0;
        if (s_hist.empty()) {
            double l1 = 0.0;
            for (double v : g) l1 += std::abs(v);
            t0 = std::min(1.0, 1.0 / l1);
        }

        LineSearchResult ls = strong_wolfe(fn, res.x, t0, d, res.f, g, opts);
        res.evaluations += ls.evaluations;
        if (!ls.ok) {
            res.status = LbfgsStatus::LineSearchFailed;
            return res;
        }

        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = ls.t * d[i];
            y[i] = ls.g[i] - g[i];
            res.x[i] += s[i];
        }
        const double sy = dot(s, y);
        if (sy > 1e-10) {
            if (static_cast<int>(s_hist.size()) == opts.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho.pop_front();
            }
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho.push_back(1.0 / sy);
        }
        const double f_old = res.f;
        res.f = ls.f;
        g = std::move(ls.g);
        res.iterations = it;
        if (on_iter) on_iter(it, res.f, res.x);

        if (f_old - res.f < opts.tolerance) {
            res.status = LbfgsStatus::Converged;
            return res;
        }
        if (max_abs(g) <= opts.grad_tolerance) {
            res.status = LbfgsStatus::SmallGradient;
            return res;
        }
    }
    res.status = LbfgsStatus::MaxIterations;
    return res;
}

}  // namespace darcynas
