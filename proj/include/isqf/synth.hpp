#pragma once

// Synthetic distributions and panels with known ground truth.

#include "isqf/panel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace isqf {

enum class SynthKind { GaussianMixture, Cauchy, Exponential, NoisySinusoidPanel };

struct MixtureComponent {
    double weight;
    double mean;
    double sd;
};

struct SynthSpec {
    SynthKind kind = SynthKind::GaussianMixture;
    /// Three equal-weight peaks at -4, 0 and 4 with standard deviation 0.6.
    std::vector<MixtureComponent> components{{1.0 / 3, -4.0, 0.6}, {1.0 / 3, 0.0, 0.6}, {1.0 / 3, 4.0, 0.6}};
    double location = 0.0;  // cauchy
    double scale = 1.0;     // cauchy
    double rate = 1.0;      // exponential
    std::size_t samples = 20000;
    // noisy-sinusoid-panel
    std::size_t series = 20;
    std::size_t length = 96;   // observed steps
    std::size_t horizon = 24;  // extra held-out steps appended to every series
    double period = 24.0;
    double noise = 0.3;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Parses `kind[:key=value,...]`, e.g. `cauchy:location=1,scale=2` or
/// `gaussian-mixture:weights=0.5/0.5,means=-1/1,sds=0.3/0.3`.
SynthSpec parse_synth_spec(const std::string& text);
std::string to_string(SynthKind kind);

/// I.i.d. draws; deterministic for a fixed seed.
std::vector<double> generate_samples(const SynthSpec& spec);

double true_cdf(const SynthSpec& spec, double z);
/// Inverts true_cdf by bisection to an absolute width of 1e-12.
double true_quantile(const SynthSpec& spec, double alpha);

/// Series of length + horizon steps: level U[0,3], amplitude U[0.5,1.5],
/// random phase, Gaussian noise.
SeriesPanel generate_panel(const SynthSpec& spec);

} // namespace isqf
