#include "noma/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace noma {

namespace {

template <class T>
Accelerated<T> wynn_epsilon(std::span<const T> sums)
{
    const std::size_t n = sums.size();
    if (n < 3 || n % 2 == 0) {
        throw std::invalid_argument("epsilon algorithm needs an odd number (>= 3) of partial sums");
    }
    double scale = 0.0;
    for (const T& s : sums) {
        scale = std::max(scale, std::abs(s));
    }
    const double tiny = std::max(1e-300, 1e-15 * scale);

    // prev holds column k-1, cur holds column k; both indexed by the row offset.
    std::vector<T> prev(n + 1, T{});
    std::vector<T> cur(sums.begin(), sums.end());
    std::vector<T> last_even = cur;

    for (std::size_t k = 1; k < n; ++k) {
        std::vector<T> next(n - k);
        for (std::size_t j = 0; j + 1 < cur.size(); ++j) {
            const T diff = cur[j + 1] - cur[j];
            if (std::abs(diff) <= tiny) {
                // Singular table. Fall back to the deepest complete even column.
                const std::size_t m = last_even.size();
                const T best = last_even[m - 1];
                const bool settled = m >= 2 && std::abs(last_even[m - 1] - last_even[m - 2]) <=
                                                   1e-12 * std::max(1.0, std::abs(best));
                return {best, !settled};
            }
            next[j] = prev[j + 1] + T(1.0) / diff;
        }
        prev = std::move(cur);
        cur = std::move(next);
        if (k % 2 == 0) {
            last_even = cur;
        }
    }
    return {cur.front(), false};
}

} // namespace

Accelerated<double> epsilon_accelerate(std::span<const double> partial_sums)
{
    return wynn_epsilon<double>(partial_sums);
}

Accelerated<cplx> epsilon_accelerate(std::span<const cplx> partial_sums)
{
    return wynn_epsilon<cplx>(partial_sums);
}

double invert_1d(const Transform1D& F, double tau, const Inversion1DConfig& cfg)
{
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw std::invalid_argument("inversion abscissa must be positive and finite");
    }
    if (cfg.euler_terms < 0 || cfg.truncation < 1 || !(cfg.A > 0.0)) {
        throw std::invalid_argument("invalid Euler-summation configuration");
    }
    const int m_terms = cfg.euler_terms;
    const int n_max = cfg.truncation + m_terms;
    const double half_a = cfg.A / 2.0;

    auto evaluate = [&](cplx s) {
        const cplx value = F(s);
        if (!std::isfinite(value.real()) || !std::isfinite(value.imag())) {
            throw NumericalError("transform returned a non-finite value");
        }
        return value.real();
    };

    // partial[n] = sum of the first n+1 alternating terms.
    std::vector<double> partial(n_max + 1);
    partial[0] = 0.5 * evaluate(cplx(half_a / tau, 0.0));
    for (int n = 1; n <= n_max; ++n) {
        const cplx s((cfg.A) / (2.0 * tau), n * std::numbers::pi / tau);
        const double term = evaluate(s);
        partial[n] = partial[n - 1] + ((n % 2 == 0) ? term : -term);
    }

    // Binomial (Euler) average of partial sums Q .. Q+M.
    double binom = 1.0;
    double sum = 0.0;
    for (int m = 0; m <= m_terms; ++m) {
        sum += binom * partial[cfg.truncation + m];
        binom = binom * (m_terms - m) / (m + 1);
    }
    return std::exp(half_a) / tau * std::ldexp(sum, -m_terms);
}

Inversion2DConfig Inversion2DConfig::resolved(double theta1, double theta2) const
{
    Inversion2DConfig out = *this;
    if (out.T <= 0.0) {
        out.T = period_factor * std::max(theta1, theta2);
    }
    if (out.c1 <= 0.0) {
        out.c1 = A / (2.0 * out.T);
    }
    if (out.c2 <= 0.0) {
        const double xi = std::exp(-2.0 * out.T * out.c1);
        if (!(xi < target_error)) {
            throw std::invalid_argument("c1 too small for the requested discretization error");
        }
        out.c2 = -std::log(target_error / (1.0 - xi)) / (2.0 * out.T);
    }
    return out;
}

Inversion2DResult invert_2d(const Transform2D& F, double theta1, double theta2,
                            const Inversion2DConfig& cfg_in)
{
    if (!(theta1 > 0.0) || !(theta2 > 0.0) || !std::isfinite(theta1) || !std::isfinite(theta2)) {
        throw std::invalid_argument("inversion abscissae must be positive and finite");
    }
    if (cfg_in.L < 1 || cfg_in.eps_depth < 1) {
        throw std::invalid_argument("invalid two-dimensional inversion configuration");
    }
    if (theta1 > theta2) {
        // The inner sum converges better over the variable with the larger abscissa.
        return invert_2d([&F](cplx s, cplx t) { return F(t, s); }, theta2, theta1, cfg_in);
    }
    const Inversion2DConfig cfg = cfg_in.resolved(theta1, theta2);
    if (!(theta1 < 2.0 * cfg.T) || !(theta2 < 2.0 * cfg.T)) {
        throw std::invalid_argument("abscissae must lie inside one period (0, 2T)");
    }

    const int n_sums = 2 * cfg.eps_depth + 1;
    const int last = cfg.L + n_sums - 1; // highest index summed
    const double step = std::numbers::pi / cfg.T;
    bool degraded = false;

    auto evaluate = [&](int l1, int l2) {
        const cplx value = F(cplx(cfg.c1, l1 * step), cplx(cfg.c2, l2 * step));
        if (!std::isfinite(value.real()) || !std::isfinite(value.imag())) {
            throw NumericalError("transform returned a non-finite value");
        }
        return value;
    };

    auto accelerate = [&](const std::vector<cplx>& cumulative) {
        const std::span<const cplx> tail(cumulative.data() + cfg.L, n_sums);
        const Accelerated<cplx> acc = epsilon_accelerate(tail);
        degraded = degraded || acc.degraded;
        return acc.value;
    };

    // Phase factors e^{i l pi theta / T}.
    std::vector<cplx> phase1(last + 1);
    std::vector<cplx> phase2(last + 1);
    for (int l = 0; l <= last; ++l) {
        phase1[l] = std::polar(1.0, l * step * theta1);
        phase2[l] = std::polar(1.0, l * step * theta2);
    }

    // row(l1) = sum over all integer l2 of F^{l1,l2} E2^{l2}, with the two one-sided
    // tails accelerated separately. Rows for negative l1 are conjugates.
    std::vector<cplx> outer(last + 1);
    cplx outer_sum{};
    for (int l1 = 0; l1 <= last; ++l1) {
        std::vector<cplx> up(last + 1);
        std::vector<cplx> down(last + 1);
        cplx acc_up{};
        cplx acc_down{};
        for (int l2 = 0; l2 <= last; ++l2) {
            acc_up += evaluate(l1, l2) * phase2[l2];
            up[l2] = acc_up;
            if (l2 > 0) {
                acc_down += evaluate(l1, -l2) * std::conj(phase2[l2]);
            }
            down[l2] = acc_down;
        }
        const cplx row = accelerate(up) + accelerate(down);
        if (l1 == 0) {
            outer_sum = cplx(row.real(), 0.0);
        } else {
            outer_sum += 2.0 * row * phase1[l1];
        }
        outer[l1] = outer_sum;
    }
    const cplx total = accelerate(outer);
    const double value =
        std::exp(cfg.c1 * theta1 + cfg.c2 * theta2) / (4.0 * cfg.T * cfg.T) * total.real();
    if (!std::isfinite(value)) {
        throw NumericalError("two-dimensional inversion produced a non-finite value");
    }
    return {value, degraded};
}

} // namespace noma
