#pragma once

#include <optional>
#include <utility>

#include "btc/spin_algebra.hpp"
#include "btc/types.hpp"

namespace btc {

/// Physical parameters of a single or cascaded boundary time-crystal.
/// Frequencies and rates share one unit; the CLI works in units of kappa.
struct ModelParams {
    int n_spins = 1;
    double omega = 0.0;
    std::optional<double> omega_d;  ///< decoder Rabi frequency; set only for the cascaded system
    double kappa = 1.0;

    static ModelParams single(int n_spins, double omega, double kappa = 1.0);
    static ModelParams cascaded(int n_spins, double omega, double omega_d, double kappa = 1.0);

    bool is_cascaded() const { return omega_d.has_value(); }
    /// Critical Rabi frequency kappa * N / 2.
    double omega_c() const { return kappa * n_spins / 2.0; }
    void validate() const;
};

/// Size limits for exact (density-matrix) solves and for building generators.
struct SizeLimits {
    int exact_single = 40;
    int exact_cascaded = 14;
    int generator_cascaded = 40;
};

class DensityMatrix {
public:
    DensityMatrix() = default;
    explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {}

    const CMatrix& matrix() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }
    Complex trace() const { return m_.trace(); }
    double hermiticity_error() const { return max_abs(m_ - m_.adjoint()); }
    double min_eigenvalue() const;
    double purity() const;
    /// <psi|rho|psi> for a normalized pure state.
    double fidelity(const CVector& psi) const;
    Complex expectation(const SparseMatrix& op) const;

private:
    CMatrix m_;
};

enum class GeneratorKind { lindblad, tilted, deformed };

/// A Lindblad-type superoperator acting on d x d matrices as
///   G(rho) = -i (H1 rho - rho H2) + e^{-s} L rho L^dag - (L^dag L rho + rho L^dag L) / 2
/// with H1 = H(omega1), H2 = H(omega2). The plain generator has omega1 = omega2 = omega
/// and s = 0. The action costs a handful of sparse-dense products; the vectorized
/// superoperator is only assembled on request.
class Generator {
public:
    GeneratorKind kind() const { return kind_; }
    const ModelParams& params() const { return params_; }
    int dim() const { return static_cast<int>(jump_.rows()); }
    double counting_field() const { return s_; }
    std::pair<double, double> deform_omegas() const { return {omega_left_, omega_right_}; }

    /// H(omega) = omega * drive + static part.
    SparseMatrix hamiltonian(double omega) const;
    const SparseMatrix& drive() const { return drive_; }
    const SparseMatrix& jump() const { return jump_; }
    const SparseMatrix& jump_number() const { return jump_number_; }
    /// Non-Hermitian H - (i/2) L^dag L used by the waiting-time unraveling.
    SparseMatrix effective_hamiltonian() const;

    CMatrix apply(const CMatrix& rho) const;
    void apply(const CMatrix& rho, CMatrix& out) const;

    /// Column-stacked superoperator: vec(G(rho)) = S vec(rho).
    SparseColMatrix superoperator() const;
    /// Dense superoperator for small oracle computations; throws if d^2 > max_dim.
    CMatrix dense_superoperator(int max_dim = 4096) const;

    friend Generator build_btc_generator(const ModelParams&);
    friend Generator build_cascaded_generator(const ModelParams&, const SizeLimits&);
    friend Generator tilt(const Generator&, double);
    friend Generator deform(const Generator&, double, double);

private:
    Generator() = default;
    void refresh();

    ModelParams params_;
    GeneratorKind kind_ = GeneratorKind::lindblad;
    double s_ = 0.0;
    double omega_left_ = 0.0;
    double omega_right_ = 0.0;

    SparseMatrix drive_;
    SparseMatrix static_h_;
    SparseMatrix jump_;
    SparseMatrix jump_adj_;
    SparseMatrix jump_number_;
    // G(rho) = left_ rho + rho right_ + e^{-s} L rho L^dag
    SparseMatrix left_;
    SparseMatrix right_;
};

/// -i omega [Sx, rho] + kappa D[S_-] rho on the Dicke sector of N spins.
Generator build_btc_generator(const ModelParams& params);
/// Sensor-decoder cascade with H = omega Sx1 + omega_D Sx2 + H_c and collective jump sqrt(kappa) J_-.
Generator build_cascaded_generator(const ModelParams& params, const SizeLimits& limits = {});
/// Counting-field tilt: the recycling term L rho L^dag is scaled by e^{-s}.
Generator tilt(const Generator& g, double s);
/// Two-frequency deformation with H(omega1) acting from the left and H(omega2) from the right.
Generator deform(const Generator& g, double omega1, double omega2);

struct StationaryOptions {
    double tol = 1e-9;
    int refinement_steps = 3;
    SizeLimits limits;
};

struct StationaryResult {
    DensityMatrix rho_ss;
    double residual = 0.0;
    double intensity = 0.0;
};

StationaryResult stationary_state(const Generator& g, const StationaryOptions& options = {});

/// Throws ValidationError when the generator is larger than the exact-solve limits.
void check_exact_size(const ModelParams& params, const SizeLimits& limits);

/// Trace over the decoder of a cascaded density matrix.
CMatrix reduced_sensor_state(const CMatrix& rho, const SpinSector& sector);
/// Trace over the sensor of a cascaded density matrix.
CMatrix reduced_decoder_state(const CMatrix& rho, const SpinSector& sector);

}  // namespace btc
