#pragma once

// EMG pre-processing (band-pass, notch, RMS envelope), dataset assembly and a
// ground-truth synthetic muscle/force generator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "relspec/dataset.hpp"
#include "relspec/error.hpp"
#include "relspec/polynomial.hpp"
#include "relspec/spectrum.hpp"

namespace relspec::signal {

struct Channel {
    std::string name;
    std::vector<double> samples;
};

struct Recording {
    double sample_rate_hz = 0.0;
    std::vector<Channel> emg;
    std::vector<Channel> force;

    std::size_t length() const {
        if (!emg.empty()) return emg.front().samples.size();
        return force.empty() ? 0 : force.front().samples.size();
    }

    void validate() const {
        relspec::detail::require(sample_rate_hz > 0 && std::isfinite(sample_rate_hz),
                                 "recording: sample rate must be positive");
        const std::size_t n = length();
        auto check = [n](const std::vector<Channel>& chans) {
            for (const auto& c : chans) {
                if (c.samples.size() != n)
                    throw ValidationError("recording: channel '" + c.name + "' has " +
                                          std::to_string(c.samples.size()) + " samples, expected " +
                                          std::to_string(n));
                for (std::size_t i = 0; i < n; ++i)
                    if (!std::isfinite(c.samples[i]))
                        throw DataError("recording: non-finite sample in channel '" + c.name + "' at row " +
                                        std::to_string(i + 1));
            }
        };
        check(emg);
        check(force);
    }

    std::vector<std::string> emg_names() const {
        std::vector<std::string> v;
        for (const auto& c : emg) v.push_back(c.name);
        return v;
    }
    std::vector<std::string> force_names() const {
        std::vector<std::string> v;
        for (const auto& c : force) v.push_back(c.name);
        return v;
    }
};

struct FilterSpec {
    double highpass_hz = 10.0;
    double lowpass_hz = 450.0;
    double notch_hz = 50.0;
    double notch_q = 30.0;
    int butterworth_order = 4;
    bool zero_phase = true;

    void validate(double sample_rate_hz) const {
        const double nyquist = sample_rate_hz / 2.0;
        if (!(highpass_hz > 0)) throw ValidationError("filter: highpass cutoff must be > 0");
        if (!(lowpass_hz > highpass_hz)) throw ValidationError("filter: lowpass cutoff must exceed highpass");
        if (!(lowpass_hz < nyquist))
            throw ValidationError("filter: lowpass cutoff " + std::to_string(lowpass_hz) + " Hz >= Nyquist " +
                                  std::to_string(nyquist) + " Hz");
        if (!(notch_hz > highpass_hz && notch_hz < lowpass_hz))
            throw ValidationError("filter: notch frequency must lie inside the pass band");
        if (!(notch_q > 0)) throw ValidationError("filter: notch Q must be > 0");
        if (butterworth_order < 1) throw ValidationError("filter: butterworth order must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// IIR filtering with second-order sections (direct form II transposed)

struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};
using Sos = std::vector<Biquad>;

enum class BandType { lowpass, highpass };

/// Digital Butterworth filter by bilinear transform with frequency prewarping.
inline Sos butterworth(int order, double cutoff_hz, double sample_rate_hz, BandType type) {
    relspec::detail::require(order >= 1, "butterworth: order must be >= 1");
    relspec::detail::require(cutoff_hz > 0 && cutoff_hz < sample_rate_hz / 2,
                             "butterworth: cutoff must lie in (0, Nyquist)");
    const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate_hz);
    const double k2 = k * k;
    Sos sos;
    for (int i = 0; i < order / 2; ++i) {
        // analog pole pair s^2 + 2 zeta s + 1
        const double two_zeta = 2.0 * std::sin(std::numbers::pi * (2.0 * i + 1.0) / (2.0 * order));
        const double norm = 1.0 / (1.0 + two_zeta * k + k2);
        Biquad q;
        q.a1 = 2.0 * (k2 - 1.0) * norm;
        q.a2 = (1.0 - two_zeta * k + k2) * norm;
        if (type == BandType::lowpass) {
            q.b0 = k2 * norm;
            q.b1 = 2.0 * q.b0;
            q.b2 = q.b0;
        } else {
            q.b0 = norm;
            q.b1 = -2.0 * norm;
            q.b2 = norm;
        }
        sos.push_back(q);
    }
    if (order % 2 == 1) {
        const double norm = 1.0 / (1.0 + k);
        Biquad q;
        q.a1 = (k - 1.0) * norm;
        if (type == BandType::lowpass) {
            q.b0 = k * norm;
            q.b1 = q.b0;
        } else {
            q.b0 = norm;
            q.b1 = -norm;
        }
        sos.push_back(q);
    }
    return sos;
}

/// Second-order IIR notch with quality factor q.
inline Sos notch(double freq_hz, double q, double sample_rate_hz) {
    relspec::detail::require(freq_hz > 0 && freq_hz < sample_rate_hz / 2, "notch: frequency outside (0, Nyquist)");
    const double w0 = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad b;
    b.b0 = 1.0 / a0;
    b.b1 = -2.0 * std::cos(w0) / a0;
    b.b2 = 1.0 / a0;
    b.a1 = b.b1;
    b.a2 = (1.0 - alpha) / a0;
    return {b};
}

/// |H(e^{jw})| of a cascade at the given frequency.
inline double magnitude_response(const Sos& sos, double freq_hz, double sample_rate_hz) {
    const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate_hz);
    std::complex<double> h = 1.0;
    for (const auto& s : sos) h *= (s.b0 + s.b1 * z1 + s.b2 * z1 * z1) / (1.0 + s.a1 * z1 + s.a2 * z1 * z1);
    return std::abs(h);
}

namespace detail {

struct SectionState {
    double z1 = 0, z2 = 0;
};

// Steady-state delay values of each section for a unit step input.
inline std::vector<SectionState> step_initial_state(const Sos& sos) {
    std::vector<SectionState> zi;
    double scale = 1.0;  // input level reaching this section
    for (const auto& s : sos) {
        const double denom = 1.0 + s.a1 + s.a2;
        const double dc = denom == 0.0 ? 0.0 : (s.b0 + s.b1 + s.b2) / denom;
        const double y = dc * scale;
        SectionState st;
        st.z2 = s.b2 * scale - s.a2 * y;
        st.z1 = y - s.b0 * scale;
        zi.push_back(st);
        scale = y;
    }
    return zi;
}

inline void run_sos(const Sos& sos, std::vector<double>& x, std::vector<SectionState> state) {
    for (std::size_t k = 0; k < sos.size(); ++k) {
        const auto& s = sos[k];
        auto& st = state[k];
        for (double& v : x) {
            const double y = s.b0 * v + st.z1;
            st.z1 = s.b1 * v - s.a1 * y + st.z2;
            st.z2 = s.b2 * v - s.a2 * y;
            v = y;
        }
    }
}

}  // namespace detail

/// Causal filtering from rest.
inline std::vector<double> sosfilt(const Sos& sos, std::span<const double> x) {
    std::vector<double> y(x.begin(), x.end());
    detail::run_sos(sos, y, std::vector<detail::SectionState>(sos.size()));
    return y;
}

/// Zero-phase forward-backward filtering. The signal is extended at both ends
/// by odd reflection and each pass starts from the steady state for its first
/// sample, which keeps edge transients small and the operation linear.
inline std::vector<double> sosfiltfilt(const Sos& sos, std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    const std::size_t pad = std::min<std::size_t>(n - 1, 3 * (2 * sos.size() + 1));
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    const auto zi = detail::step_initial_state(sos);
    auto scaled = [&](double v) {
        auto s = zi;
        for (auto& st : s) {
            st.z1 *= v;
            st.z2 *= v;
        }
        return s;
    };
    detail::run_sos(sos, ext, scaled(ext.front()));
    std::reverse(ext.begin(), ext.end());
    detail::run_sos(sos, ext, scaled(ext.front()));
    std::reverse(ext.begin(), ext.end());
    return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

/// High-pass, low-pass and notch applied in turn to every EMG channel;
/// force channels pass through untouched.
inline Recording filter_chain(const Recording& rec, const FilterSpec& spec) {
    rec.validate();
    spec.validate(rec.sample_rate_hz);
    const std::vector<Sos> stages = {
        butterworth(spec.butterworth_order, spec.highpass_hz, rec.sample_rate_hz, BandType::highpass),
        butterworth(spec.butterworth_order, spec.lowpass_hz, rec.sample_rate_hz, BandType::lowpass),
        notch(spec.notch_hz, spec.notch_q, rec.sample_rate_hz)};
    Recording out = rec;
    for (auto& ch : out.emg)
        for (const auto& sos : stages) ch.samples = spec.zero_phase ? sosfiltfilt(sos, ch.samples) : sosfilt(sos, ch.samples);
    return out;
}

// ---------------------------------------------------------------------------
// RMS envelope

/// Window length in samples: round(window_ms * rate / 1000), forced odd.
inline std::size_t envelope_window(double window_ms, double sample_rate_hz) {
    const double raw = std::round(window_ms * sample_rate_hz / 1000.0);
    if (!(raw >= 1)) throw ValidationError("rms_envelope: window spans less than one sample");
    auto w = static_cast<std::size_t>(raw);
    if (w % 2 == 0) ++w;
    return w;
}

/// Centered sliding RMS; near the edges the window shrinks to the samples
/// that exist. Output length equals input length.
inline std::vector<double> rms_envelope(std::span<const double> x, double window_ms, double sample_rate_hz) {
    if (x.empty()) throw ValidationError("rms_envelope: empty input");
    const std::size_t half = envelope_window(window_ms, sample_rate_hz) / 2;
    const std::size_t n = x.size();
    std::vector<long double> prefix(n + 1, 0.0L);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + static_cast<long double>(x[i]) * x[i];
    std::vector<double> env(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        const long double sum = prefix[hi + 1] - prefix[lo];
        const auto count = static_cast<long double>(hi - lo + 1);
        env[i] = static_cast<double>(std::sqrt(std::max(0.0L, sum / count)));
    }
    return env;
}

/// Replace every EMG channel by its RMS envelope.
inline Recording envelopes(const Recording& rec, double window_ms = 250.0) {
    rec.validate();
    Recording out = rec;
    for (auto& ch : out.emg) ch.samples = rms_envelope(ch.samples, window_ms, rec.sample_rate_hz);
    return out;
}

// ---------------------------------------------------------------------------

/// Features [1, emg...] and targets [force...] for every decimation-th sample.
inline Dataset build_dataset(const Recording& rec, std::size_t decimation = 1) {
    rec.validate();
    relspec::detail::require(decimation >= 1, "build_dataset: decimation must be >= 1");
    const std::size_t n = rec.length();
    const std::size_t rows = (n + decimation - 1) / decimation;
    Dataset d;
    d.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rec.emg.size() + 1));
    d.targets.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rec.force.size()));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t src = r * decimation;
        const auto row = static_cast<Eigen::Index>(r);
        d.features(row, 0) = 1.0;
        for (std::size_t c = 0; c < rec.emg.size(); ++c)
            d.features(row, static_cast<Eigen::Index>(c + 1)) = rec.emg[c].samples[src];
        for (std::size_t c = 0; c < rec.force.size(); ++c)
            d.targets(row, static_cast<Eigen::Index>(c)) = rec.force[c].samples[src];
    }
    d.feature_names = rec.emg_names();
    d.target_names = rec.force_names();
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------
// Synthetic ground truth

struct GroundTruthSystem {
    std::vector<std::string> variable_names;
    std::vector<std::string> output_names;
    std::vector<poly::SparsePoly> polys;  // one per output, over the variables
    std::vector<double> frequency_hz;     // per channel
    std::vector<double> amplitude;
    std::vector<double> phase_rad;
    double noise_sd = 0.0;
    bool emg_carrier = false;  // emit activation * N(0,1) instead of the activation itself

    std::size_t variables() const { return variable_names.size(); }

    void validate() const {
        const std::size_t v = variables();
        relspec::detail::require(v >= 1, "ground truth: need at least one variable");
        relspec::detail::require(polys.size() == output_names.size(), "ground truth: one polynomial per output");
        for (const auto& p : polys)
            relspec::detail::require(p.variables() == v, "ground truth: polynomial over wrong variable count");
        relspec::detail::require(frequency_hz.size() == v && amplitude.size() == v && phase_rad.size() == v,
                                 "ground truth: activation protocol must have one entry per variable");
        for (double f : frequency_hz) relspec::detail::require(f > 0, "ground truth: frequencies must be > 0");
        relspec::detail::require(noise_sd >= 0, "ground truth: noise_sd must be >= 0");
    }
};

/// Default activation frequencies: channel i at base * (1 + i / golden ratio),
/// so no two channels share a frequency.
inline std::vector<double> default_frequencies(std::size_t channels, double base_hz = 0.1) {
    std::vector<double> f;
    for (std::size_t i = 0; i < channels; ++i) f.push_back(base_hz * (1.0 + static_cast<double>(i) / std::numbers::phi));
    return f;
}

/// Every monomial up to `degree` gets a coefficient uniform on [-scale, scale];
/// phases are uniform on [0, 2 pi). Deterministic in seed.
inline GroundTruthSystem random_ground_truth(std::vector<std::string> variable_names,
                                             std::vector<std::string> output_names, std::size_t degree,
                                             double coefficient_scale, std::uint64_t seed) {
    GroundTruthSystem sys;
    const std::size_t v = variable_names.size();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(-coefficient_scale, coefficient_scale);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const auto items = spectrum::canonical_items(spectrum::identity_order(v), degree);
    for (std::size_t o = 0; o < output_names.size(); ++o) {
        poly::SparsePoly p(v);
        for (const auto& m : items)
            if (m.degree() <= degree) p.add_term(m, coef(rng));
        sys.polys.push_back(std::move(p));
    }
    sys.frequency_hz = default_frequencies(v);
    sys.amplitude.assign(v, 1.0);
    for (std::size_t i = 0; i < v; ++i) sys.phase_rad.push_back(phase(rng));
    sys.variable_names = std::move(variable_names);
    sys.output_names = std::move(output_names);
    return sys;
}

struct SyntheticRecording {
    Recording recording;
    Eigen::MatrixXd activations;  // samples x variables, e_i(t)
    spectrum::RelationSpectrum truth;
};

/// Activations e_i(t) = A_i (1 + sin(2 pi f_i t + phi_i)) / 2 and forces equal
/// to the true polynomials at e(t) plus N(0, noise_sd^2) noise.
inline SyntheticRecording synthesize_recording(const GroundTruthSystem& sys, double duration_s, double sample_rate_hz,
                                               std::uint64_t rng_seed) {
    sys.validate();
    relspec::detail::require(duration_s > 0 && sample_rate_hz > 0, "synthesize: duration and rate must be > 0");
    const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
    const std::size_t v = sys.variables();

    SyntheticRecording out;
    out.truth = spectrum::from_polynomials(sys.polys, sys.variable_names, sys.output_names);
    out.activations.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(v));
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate_hz;
        for (std::size_t c = 0; c < v; ++c)
            out.activations(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                sys.amplitude[c] * (1.0 + std::sin(2.0 * std::numbers::pi * sys.frequency_hz[c] * t + sys.phase_rad[c])) / 2.0;
    }

    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto& rec = out.recording;
    rec.sample_rate_hz = sample_rate_hz;
    for (std::size_t c = 0; c < v; ++c) {
        Channel ch{sys.variable_names[c], std::vector<double>(n)};
        for (std::size_t i = 0; i < n; ++i) {
            const double e = out.activations(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
            ch.samples[i] = sys.emg_carrier ? e * gauss(rng) : e;
        }
        rec.emg.push_back(std::move(ch));
    }
    for (const auto& name : sys.output_names) rec.force.push_back({name, std::vector<double>(n)});
    std::vector<double> x(v);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < v; ++c) x[c] = out.activations(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        const Eigen::VectorXd y = spectrum::evaluate_spectrum(out.truth, x);
        for (std::size_t o = 0; o < rec.force.size(); ++o) {
            double f = y(static_cast<Eigen::Index>(o));
            if (sys.noise_sd > 0) f += sys.noise_sd * gauss(rng);
            rec.force[o].samples[i] = f;
        }
    }
    return out;
}

}  // namespace relspec::signal
