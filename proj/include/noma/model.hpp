#pragma once

#include <limits>

#include "noma/common.hpp"

namespace noma {

/// Network-wide scenario description. All quantities linear (W, m, BSs/m^2).
struct NetworkParams {
    double lambda_b = 1e-5;           ///< BS intensity
    double lambda_u = 2e-4;           ///< user intensity
    double alpha = 3.5;               ///< path-loss exponent, > 2
    double P = dbm_to_watt(20.0);     ///< per-stream transmit power
    double rho_I = dbm_to_watt(15.0); ///< interferer power
    double sigma2 = dbm_to_watt(-99.0);
    int M = 3; ///< transmit antennas
    int N = 2; ///< receive antennas
    int K = 2; ///< NOMA pairs per cell
    double c = 1.25;

    /// Throws std::invalid_argument on a violated invariant.
    void validate() const;

    double path_loss(double distance) const { return std::pow(distance, -alpha); }
};

/// Partial CSI of one link: known part plus Kronecker error statistics.
struct ChannelEstimate {
    CMatrix H_hat; ///< N x M
    CMatrix R_t;   ///< M x M transmit error covariance
    CMatrix R_r;   ///< N x N receive error covariance
    double sigma_h2 = 0.0;

    void validate() const;
    int rx() const { return static_cast<int>(H_hat.rows()); }
    int tx() const { return static_cast<int>(H_hat.cols()); }
};

/// One NOMA pair: near user k and far user k~.
struct PairConfig {
    double beta_k2 = 0.3; ///< near-user power share
    double R_k = 1.0;     ///< near-user target rate, bps/Hz
    double R_kt = 0.5;    ///< far-user target rate, bps/Hz
    double d_k = 50.0;
    double d_kt = 125.0;
    int r_k = 1;  ///< rank of the near user under distance-based grouping
    int r_kt = 4; ///< rank of the far user

    double beta_kt2() const { return 1.0 - beta_k2; }

    /// beta_k^2 (2^{R_kt} - 1) < 1, required for a nontrivial far-user success event.
    bool rate_split_feasible() const;

    /// Checks power split, distances and (for the given total 2K) the ranks.
    void validate(int K) const;
};

/// (kappa^{|i-j|}) correlation profile.
CMatrix exponential_covariance(int dim, double kappa);

/// Hermitian PSD square root via eigendecomposition. Eigenvalues below
/// -negative_tolerance are rejected, the rest are clamped at zero.
CMatrix hermitian_sqrt(const CMatrix& R, double negative_tolerance = 1e-10);

/// Draws E = R_r^{1/2} E_w R_t^{1/2}, vec(E_w) ~ CN(0, sigma_h^2 I).
/// Square roots are computed once at construction.
class ErrorSampler {
public:
    explicit ErrorSampler(const ChannelEstimate& est);

    CMatrix operator()(Rng& rng) const;

private:
    CMatrix sqrt_rr_;
    CMatrix sqrt_rt_;
    double sigma_h2_;
};

CMatrix sample_error_matrix(const ChannelEstimate& est, Rng& rng);

/// ||H_hat||_F^2 / (sigma_h^2 Tr(R_t) Tr(R_r)); +infinity when sigma_h2 == 0.
double channel_k_factor(const ChannelEstimate& est);

/// sigma_h^2 giving the requested K factor (dB) for this known channel and covariances.
double error_variance_for_k_factor(double k_factor_db, const CMatrix& H_hat, const CMatrix& R_t,
                                   const CMatrix& R_r);

/// N x M i.i.d. CSCG matrix rescaled so that ||H||_F^2 = M N.
CMatrix sample_known_channel(int N, int M, Rng& rng);

/// Convenience: known channel of a given draw with exponential-profile covariances and
/// sigma_h^2 set from the K factor.
ChannelEstimate make_channel_estimate(const CMatrix& H_hat, double kappa, double k_factor_db);

} // namespace noma
