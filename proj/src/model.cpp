#include "noma/model.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace noma {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw std::invalid_argument(what);
    }
}

bool is_hermitian(const CMatrix& R, double tol)
{
    return R.rows() == R.cols() && (R - R.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

} // namespace

void NetworkParams::validate() const
{
    require(alpha > 2.0, "alpha must exceed 2");
    require(lambda_b >= 0.0 && lambda_u >= 0.0, "intensities must be nonnegative");
    require(P > 0.0, "transmit power must be positive");
    require(rho_I >= 0.0 && sigma2 >= 0.0, "powers must be nonnegative");
    require(M >= 1 && N >= 1 && K >= 1, "antenna and pair counts must be positive");
    require(K <= std::min(M, N), "K must not exceed min(M, N)");
    require(K <= 2 * N, "K must not exceed 2N");
    require(c > 0.0, "cell-geometry constant must be positive");
}

void ChannelEstimate::validate() const
{
    require(H_hat.size() > 0, "known channel is empty");
    require(R_t.rows() == H_hat.cols() && R_t.cols() == H_hat.cols(), "R_t must be M x M");
    require(R_r.rows() == H_hat.rows() && R_r.cols() == H_hat.rows(), "R_r must be N x N");
    require(is_hermitian(R_t, 1e-10) && is_hermitian(R_r, 1e-10), "covariances must be Hermitian");
    require(sigma_h2 >= 0.0 && std::isfinite(sigma_h2), "sigma_h2 must be finite and nonnegative");
}

bool PairConfig::rate_split_feasible() const
{
    return beta_k2 * (std::exp2(R_kt) - 1.0) < 1.0;
}

void PairConfig::validate(int K) const
{
    require(beta_k2 > 0.0 && beta_k2 < 1.0, "beta_k2 must lie in (0, 1)");
    require(R_k >= 0.0 && R_kt >= 0.0, "target rates must be nonnegative");
    require(d_k > 0.0 && d_kt > 0.0, "distances must be positive");
    require(r_k >= 1 && r_kt <= 2 * K && r_k < r_kt, "ranks must satisfy 1 <= r_k < r_kt <= 2K");
}

CMatrix exponential_covariance(int dim, double kappa)
{
    require(dim >= 1, "dimension must be positive");
    require(kappa >= 0.0 && kappa < 1.0, "kappa must lie in [0, 1)");
    CMatrix R(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            R(i, j) = std::pow(kappa, std::abs(i - j));
        }
    }
    return R;
}

CMatrix hermitian_sqrt(const CMatrix& R, double negative_tolerance)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(R);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("eigendecomposition of covariance failed");
    }
    RVector values = eig.eigenvalues();
    if (values.minCoeff() < -negative_tolerance) {
        throw std::invalid_argument("covariance has a negative eigenvalue");
    }
    values = values.cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().adjoint();
}

ErrorSampler::ErrorSampler(const ChannelEstimate& est)
    : sqrt_rr_(hermitian_sqrt(est.R_r)), sqrt_rt_(hermitian_sqrt(est.R_t)), sigma_h2_(est.sigma_h2)
{
    est.validate();
}

CMatrix ErrorSampler::operator()(Rng& rng) const
{
    const auto n = sqrt_rr_.rows();
    const auto m = sqrt_rt_.rows();
    if (sigma_h2_ == 0.0) {
        return CMatrix::Zero(n, m);
    }
    CMatrix white(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            white(i, j) = sample_cscg(rng, sigma_h2_);
        }
    }
    return sqrt_rr_ * white * sqrt_rt_;
}

CMatrix sample_error_matrix(const ChannelEstimate& est, Rng& rng)
{
    return ErrorSampler(est)(rng);
}

double channel_k_factor(const ChannelEstimate& est)
{
    if (est.sigma_h2 == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    const double traces = est.R_t.trace().real() * est.R_r.trace().real();
    return est.H_hat.squaredNorm() / (est.sigma_h2 * traces);
}

double error_variance_for_k_factor(double k_factor_db, const CMatrix& H_hat, const CMatrix& R_t,
                                   const CMatrix& R_r)
{
    const double traces = R_t.trace().real() * R_r.trace().real();
    require(traces > 0.0, "covariance traces must be positive");
    return H_hat.squaredNorm() / (db_to_linear(k_factor_db) * traces);
}

CMatrix sample_known_channel(int N, int M, Rng& rng)
{
    require(N >= 1 && M >= 1, "channel dimensions must be positive");
    CMatrix H(N, M);
    for (int j = 0; j < M; ++j) {
        for (int i = 0; i < N; ++i) {
            H(i, j) = sample_cscg(rng, 1.0);
        }
    }
    H *= std::sqrt(static_cast<double>(M * N) / H.squaredNorm());
    return H;
}

ChannelEstimate make_channel_estimate(const CMatrix& H_hat, double kappa, double k_factor_db)
{
    ChannelEstimate est;
    est.H_hat = H_hat;
    est.R_t = exponential_covariance(static_cast<int>(H_hat.cols()), kappa);
    est.R_r = exponential_covariance(static_cast<int>(H_hat.rows()), kappa);
    est.sigma_h2 = error_variance_for_k_factor(k_factor_db, H_hat, est.R_t, est.R_r);
    return est;
}

} // namespace noma
