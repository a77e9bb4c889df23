#pragma once

#include "hesskit/landscape.hpp"
#include "hesskit/oracle.hpp"
#include "hesskit/spectral.hpp"

namespace hesskit::serial {

/// Plain-loop reference implementations of the parallel kernels. Same
/// per-item workers, no OpenMP anywhere; the test suite checks the
/// parallel kernels reproduce these bit for bit, and the bench target
/// compares their wall time.

TraceEstimate hutchinson_trace(const SymmetricOperator& op,
                               const ProbeConfig& probes);

SpectralDensity slq_density(const SymmetricOperator& op,
                            const ProbeConfig& probes,
                            const SlqOptions& options = {});

Materialized materialize(const SymmetricOperator& op, std::size_t cap = 2000);

LandscapeGrid landscape(const ModelConfig& config, const ParamVector& params,
                        const Batch& batch, std::span<const double> v1,
                        std::span<const double> v2,
                        std::pair<double, double> eps_range = {-0.5, 0.5},
                        int resolution = 41, int k_batch = 4096);

}  // namespace hesskit::serial
