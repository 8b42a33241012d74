#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tmm/discrepancy.hpp"
#include "tmm/sde.hpp"
#include "tmm/transport.hpp"

namespace tmm {

inline OptimizerOptions quantizer_defaults() {
    OptimizerOptions q;
    q.restarts = 0;
    q.max_iters = 300;
    return q;
}

struct ForwardOptions {
    // Auxiliary cloud size per particle (M_aux = children_per_particle * N).
    int children_per_particle = 20;
    // Children integrate each grid step with Euler sub-steps no longer than
    // this; the grid step itself when <= 0.
    double max_substep = 1.0 / 128.0;
    // Latin-hypercube stratification of each particle's Brownian increments
    // over the step (Brownian bridge in between). Plain draws when false.
    bool stratify = true;
    std::uint64_t seed = 0;
    // Quantizer. restarts and initial are managed by the solver.
    OptimizerOptions quantizer = quantizer_defaults();
    // Standard deviations of the fitted map are floored at
    // sd_floor * max(1, |mean|).
    double sd_floor = 1e-12;
};

// Data recorded for the step t_j -> t_{j+1}.
struct ForwardStep {
    // Auxiliary cloud at t_{j+1}, one child per row.
    Points cloud;
    // parent[i]: particle index at t_j that launched child i.
    std::vector<int> parent;
    // assigned[i]: nearest particle of Y(t_{j+1}) to child i in the
    // quantization coordinates.
    std::vector<int> assigned;
    // Componentwise erf map fitted to the cloud; quantization runs on S(cloud).
    TransportMap map = TransportMap::identity(1);
    // Discrepancy of a random N-subsample of the cloud against the cloud.
    double subsample_value = 0.0;
    // Which configuration seeded the quantizer: warm, child_means, subsample.
    std::string start;
    // Optimizer failure: Y(t_j) was carried forward.
    bool flagged = false;
    std::string warning;
};

struct ParticleFlow {
    std::vector<double> times;
    std::vector<Points> states;
    std::vector<DiscrepancyCertificate> certificates;
    // Kernel the certificate at each time is measured in.
    std::vector<Kernel> kernels;
    std::vector<ForwardStep> steps;  // steps.size() == times.size() - 1
    Kernel base_kernel = Kernel::tensor_matern(1);
    std::string model_id;
    bool martingale = false;
    std::uint64_t seed = 0;

    int n() const { return static_cast<int>(states.front().rows()); }
    int dim() const { return static_cast<int>(states.front().cols()); }
};

// Particle approximation of the law of X_t started at y0.
//
// Y(t_0) is N copies of y0 jittered by 1e-9. Each step launches
// children_per_particle children from every particle, integrates them to
// t_{j+1}, fits S = erf((x - mean) / (sqrt(2) sd)) to the cloud, and quantizes
// S(cloud) to N points by minimizing the discrepancy of base_kernel against
// the cloud's empirical measure. The certificate at t_{j+1} is therefore the
// discrepancy of Y(t_{j+1}) against the cloud in the transported kernel
// base_kernel(S(x), S(y)). At t_0 it is the discrepancy against the Dirac mass
// in base_kernel.
//
// base_kernel lives on the quantization coordinates (-1, 1)^D.
ParticleFlow propagate(const SdeModel& model, const Kernel& base_kernel, Point y0, const std::vector<double>& t_grid,
                       int n, const ForwardOptions& opts = {});

struct MomentEstimate {
    double value = 0.0;
    double error_bound = 0.0;
    // The bound is certificate * ||phi|| (exact) or the certificate alone,
    // i.e. per unit RKHS norm.
    bool per_unit_norm = true;
};

// (1/N) sum_n phi(y^n(t_j)) with the quadrature bound of the certificate.
MomentEstimate moment(const ParticleFlow& flow, int t_index, const std::function<double(Point)>& phi);
// phi must be an expansion in flow.kernels[t_index] (matched by id).
MomentEstimate moment(const ParticleFlow& flow, int t_index, const RkhsElement& phi);

}  // namespace tmm
