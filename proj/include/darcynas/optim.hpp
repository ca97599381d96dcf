#pragma once

// First-order and quasi-Newton minimizers over a flat parameter vector.

#include <functional>
#include <string>
#include <vector>

namespace darcynas {

/// Returns f(x) and writes the gradient into `grad` (already sized).
using Objective = std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(std::size_t n, AdamOptions opts);

    /// One bias-corrected update of x from gradient g.
    void step(std::vector<double>& x, const std::vector<double>& g);
    int steps() const noexcept { return t_; }

private:
    AdamOptions opts_;
    std::vector<double> m_, v_;
    int t_ = 0;
};

struct LbfgsOptions {
    int max_iters = 5000;
    int memory = 10;
    int max_line_search = 50;  // function evaluations per line search
    double tolerance = 1e-9;   // stop when the loss decrease falls below this
    double c1 = 1e-4;
    double c2 = 0.9;
    double grad_tolerance = 1e-12;
};

enum class LbfgsStatus { MaxIterations, Converged, SmallGradient, LineSearchFailed };
std::string to_string(LbfgsStatus s);

struct LbfgsResult {
    std::vector<double> x;
    double f = 0.0;
    int iterations = 0;
    int evaluations = 0;
    LbfgsStatus status = LbfgsStatus::MaxIterations;
};

/// Called after each accepted iteration with (iteration, f).
using IterationCallback = std::function<void(int iter, double f, const std::vector<double>& x)>;

/// Two-loop recursion L-BFGS with a strong-Wolfe line search (cubic
/// interpolation, bracketing then zoom). A failed line search ends the run
/// and returns the best point seen.
LbfgsResult lbfgs(const Objective& fn, std::vector<double> x0, const LbfgsOptions& opts,
                  const IterationCallback& on_iter = {});

struct LineSearchResult {
    double t = 0.0;
    double f = 0.0;
    std::vector<double> g;
    int evaluations = 0;
    bool ok = false;
};

/// Strong-Wolfe line search along d from x (f0, g0 at t = 0).
LineSearchResult strong_wolfe(const Objective& fn, const std::vector<double>& x, double t0, const std::vector<double>& d,
                              double f0, const std::vector<double>& g0, const LbfgsOptions& opts);

}  // namespace darcynas
