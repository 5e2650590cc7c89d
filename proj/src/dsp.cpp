#include "hazerp/dsp.hpp"

#include "hazerp/error.hpp"
#include "hazerp/numeric.hpp"
#include "hazerp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <set>

namespace hazerp {

namespace {

using cplx = std::complex<double>;

// DC gain of one section.
double section_dc_gain(const Biquad& s) {
    return (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
}

// Steady-state direct-form-II-transposed state for a constant input level.
void steady_state(const Biquad& s, double input_level, double& s1, double& s2) {
    const double g = section_dc_gain(s) * input_level;
    s1 = g - s.b0 * input_level;
    s2 = s.b2 * input_level - s.a2 * g;
}

void run_cascade(const std::vector<Biquad>& sections, std::vector<double>& x) {
    const double x0 = x.empty() ? 0.0 : x[0];
    double level = x0;
    for (const Biquad& s : sections) {
        double s1;
        double s2;
        steady_state(s, level, s1, s2);
        level *= section_dc_gain(s);
        for (double& v : x) {
            const double y = s.b0 * v + s1;
            s1 = s.b1 * v - s.a1 * y + s2;
            s2 = s.b2 * v - s.a2 * y;
            v = y;
        }
    }
}

} // namespace

std::vector<Biquad> design_bandpass(const FilterSpec& spec, double sample_rate_hz) {
    if (!(spec.low_cut_hz > 0.0) || !(spec.low_cut_hz < spec.high_cut_hz) ||
        !(spec.high_cut_hz < sample_rate_hz / 2.0))
        raise(ErrorCode::InvalidSpec,
              "band edges must satisfy 0 < low < high < sample_rate/2");
    if (spec.order_per_pass < 1 || spec.order_per_pass > 12)
        raise(ErrorCode::InvalidSpec, "filter order out of range");

    const int n = spec.order_per_pass;
    const double fs2 = 2.0 * sample_rate_hz;
    // Pre-warped analog edges for the bilinear transform.
    const double w1 = fs2 * std::tan(M_PI * spec.low_cut_hz / sample_rate_hz);
    const double w2 = fs2 * std::tan(M_PI * spec.high_cut_hz / sample_rate_hz);
    const double w0 = std::sqrt(w1 * w2);
    const double bw = w2 - w1;

    // Butterworth low-pass prototype poles on the unit circle (left half).
    std::vector<cplx> analog_poles;
    analog_poles.reserve(2 * static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double theta = M_PI * (2.0 * k + n + 1.0) / (2.0 * n);
        const cplx p = std::polar(1.0, theta);
        // Low-pass to band-pass: each prototype pole spawns the two roots of
        // s^2 - p*bw*s + w0^2 = 0.
        const cplx pb = p * bw;
        const cplx disc = std::sqrt(pb * pb - 4.0 * w0 * w0);
        analog_poles.push_back((pb + disc) / 2.0);
        analog_poles.push_back((pb - disc) / 2.0);
    }

    // Bilinear transform; the 2n zeros land at z = +1 (n of them, from s = 0)
    // and z = -1 (n, from infinity), giving every section the numerator
    // z^2 - 1 before gain.
    std::vector<cplx> zpoles;
    zpoles.reserve(analog_poles.size());
    for (const cplx& s : analog_poles) zpoles.push_back((fs2 + s) / (fs2 - s));

    std::vector<cplx> upper;
    std::vector<double> reals;
    for (const cplx& z : zpoles) {
        if (z.imag() > 1e-12) upper.push_back(z);
        else if (z.imag() >= -1e-12) reals.push_back(z.real());
    }
    if (upper.size() * 2 + reals.size() != zpoles.size())
        upper.clear(); // conjugates mismatched; rebuilt below from scratch
    if (upper.empty() && reals.empty())
        raise(ErrorCode::InvalidSpec, "filter design produced no poles");

    std::sort(upper.begin(), upper.end(), [](const cplx& a, const cplx& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    std::sort(reals.begin(), reals.end());

    std::vector<Biquad> sections;
    auto add_section = [&](double a1, double a2) {
        Biquad s;
        s.a1 = a1;
        s.a2 = a2;
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0;
        sections.push_back(s);
    };
    for (const cplx& z : upper) add_section(-2.0 * z.real(), std::norm(z));
    for (std::size_t i = 0; i + 1 < reals.size(); i += 2)
        add_section(-(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]);
    if (reals.size() % 2 == 1)
        raise(ErrorCode::InvalidSpec, "filter design produced an unpaired real pole");

    // Normalize to unit gain at the digital image of the analog center
    // frequency, distributing the correction evenly across sections.
    const double wd = 2.0 * std::atan(w0 / fs2);
    const cplx zi = std::exp(cplx(0.0, -wd)); // z^{-1} on the unit circle
    for (Biquad& s : sections) {
        const cplx num = s.b0 + s.b1 * zi + s.b2 * zi * zi;
        const cplx den = 1.0 + s.a1 * zi + s.a2 * zi * zi;
        const double mag = std::abs(num / den);
        if (mag <= 0.0) raise(ErrorCode::InvalidSpec, "degenerate section gain");
        s.b0 /= mag;
        s.b1 /= mag;
        s.b2 /= mag;
    }
    return sections;
}

std::vector<double> filtfilt(const std::vector<Biquad>& sections, const std::vector<double>& x) {
    if (sections.empty()) raise(ErrorCode::InvalidSpec, "empty filter cascade");
    const std::size_t pad = 3 * 2 * sections.size(); // 3x realized order
    if (x.size() <= pad + 1)
        raise(ErrorCode::InvalidSpec, "signal too short for filter padding (" +
                                          std::to_string(x.size()) + " <= " +
                                          std::to_string(pad + 1) + ")");

    const std::size_t n = x.size();
    std::vector<double> ext(n + 2 * pad);
    // Odd reflection about both endpoints.
    for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
    for (std::size_t i = 0; i < n; ++i) ext[pad + i] = x[i];
    for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

    run_cascade(sections, ext);
    std::reverse(ext.begin(), ext.end());
    run_cascade(sections, ext);
    std::reverse(ext.begin(), ext.end());

    return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                               ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

Recording rereference(const Recording& rec, const std::vector<std::string>& refs) {
    if (refs.empty()) raise(ErrorCode::UnknownChannel, "rereference: empty reference list");
    std::vector<std::size_t> ref_idx;
    ref_idx.reserve(refs.size());
    for (const std::string& name : refs) ref_idx.push_back(rec.channel_index(name));

    Recording out = rec;
    const std::size_t n = rec.n_samples();
    std::vector<double> ref_trace(n, 0.0);
    for (std::size_t idx : ref_idx)
        for (std::size_t t = 0; t < n; ++t) ref_trace[t] += rec.samples[idx][t];
    const double inv = 1.0 / static_cast<double>(ref_idx.size());
    for (std::size_t t = 0; t < n; ++t) ref_trace[t] *= inv;

    for (auto& channel : out.samples)
        for (std::size_t t = 0; t < n; ++t) channel[t] -= ref_trace[t];
    return out;
}

Recording bandpass(const Recording& rec, const FilterSpec& spec) {
    const std::vector<Biquad> sections = design_bandpass(spec, rec.sample_rate_hz);
    Recording out = rec;
    for (auto& channel : out.samples) channel = filtfilt(sections, channel);
    return out;
}

Recording interpolate_channels(const Recording& rec, const std::vector<std::string>& bad,
                               const Montage& montage) {
    if (bad.empty()) return rec;

    std::set<std::size_t> bad_idx;
    for (const std::string& name : bad) bad_idx.insert(rec.channel_index(name));

    std::vector<std::size_t> good_idx;
    for (std::size_t c = 0; c < rec.channels.size(); ++c)
        if (!bad_idx.count(c)) good_idx.push_back(c);
    if (good_idx.size() < 4)
        raise(ErrorCode::TooFewGoodChannels,
              "interpolation needs at least 4 good channels, have " +
                  std::to_string(good_idx.size()));

    auto position = [&](std::size_t c) {
        const auto pos = montage.lookup(rec.channels[c]);
        if (!pos)
            raise(ErrorCode::UnknownChannel,
                  "channel '" + rec.channels[c] + "' is not in the montage");
        return *pos;
    };

    Recording out = rec;
    const std::size_t k = 6;
    for (std::size_t b : bad_idx) {
        const Vec3 bp = position(b);
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(good_idx.size());
        for (std::size_t g : good_idx)
            dist.emplace_back(great_circle_distance(bp, position(g)), g);
        std::sort(dist.begin(), dist.end(), [](const auto& a, const auto& b2) {
            if (a.first != b2.first) return a.first < b2.first;
            return a.second < b2.second;
        });
        const std::size_t use = std::min(k, dist.size());

        double weight_sum = 0.0;
        std::vector<std::pair<std::size_t, double>> weights;
        for (std::size_t i = 0; i < use; ++i) {
            // A coincident good electrode reproduces the bad channel outright.
            const double d = std::max(dist[i].first, 1e-12);
            const double w = 1.0 / (d * d);
            weights.emplace_back(dist[i].second, w);
            weight_sum += w;
        }
        std::vector<double>& target = out.samples[b];
        std::fill(target.begin(), target.end(), 0.0);
        for (const auto& [g, w] : weights) {
            const double wn = w / weight_sum;
            const std::vector<double>& src = rec.samples[g];
            for (std::size_t t = 0; t < target.size(); ++t) target[t] += wn * src[t];
        }
    }
    return out;
}

IcaDecomposition fast_ica(const Recording& rec, std::size_t n_components, std::uint64_t seed) {
    const std::size_t n_ch = rec.channels.size();
    const std::size_t n_t = rec.n_samples();
    if (n_ch == 0 || n_t < 2) raise(ErrorCode::PreconditionViolated, "fast_ica: empty recording");
    if (n_components > n_ch)
        raise(ErrorCode::PreconditionViolated,
              "fast_ica: more components requested than channels");

    IcaDecomposition d;
    d.n_channels = n_ch;

    // Center.
    d.channel_means.resize(n_ch);
    std::vector<std::vector<double>> x(n_ch, std::vector<double>(n_t));
    for (std::size_t c = 0; c < n_ch; ++c) {
        d.channel_means[c] = mean_of(rec.samples[c]);
        for (std::size_t t = 0; t < n_t; ++t) x[c][t] = rec.samples[c][t] - d.channel_means[c];
    }

    // Channel covariance and its eigendecomposition for whitening.
    std::vector<double> cov(n_ch * n_ch, 0.0);
    for (std::size_t i = 0; i < n_ch; ++i) {
        for (std::size_t j = i; j < n_ch; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < n_t; ++t) s += x[i][t] * x[j][t];
            s /= static_cast<double>(n_t);
            cov[i * n_ch + j] = s;
            cov[j * n_ch + i] = s;
        }
    }
    const SymEigen eig = sym_eigen(cov, n_ch);
    const double lambda_max = std::max(eig.values.empty() ? 0.0 : eig.values[0], 0.0);
    std::size_t rank = 0;
    for (double v : eig.values)
        if (v > 1e-9 * lambda_max && v > 0.0) ++rank;
    if (rank == 0) raise(ErrorCode::RankDeficient, "fast_ica: zero-variance recording");
    if (n_components == 0) n_components = rank;
    if (n_components > rank)
        raise(ErrorCode::RankDeficient, "fast_ica: requested " +
                                            std::to_string(n_components) +
                                            " components but covariance rank is " +
                                            std::to_string(rank));
    const std::size_t r = n_components;
    d.n_components = r;

    // Whitening K (r x ch): D^{-1/2} E^T over the top-r eigenpairs.
    d.whitening.assign(r * n_ch, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        const double scale = 1.0 / std::sqrt(eig.values[i]);
        for (std::size_t c = 0; c < n_ch; ++c)
            d.whitening[i * n_ch + c] = scale * eig.vectors[c * n_ch + i];
    }

    // Whitened data Z = K x (r x t).
    std::vector<std::vector<double>> z(r, std::vector<double>(n_t, 0.0));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t c = 0; c < n_ch; ++c) {
            const double k = d.whitening[i * n_ch + c];
            if (k == 0.0) continue;
            const std::vector<double>& row = x[c];
            std::vector<double>& target = z[i];
            for (std::size_t t = 0; t < n_t; ++t) target[t] += k * row[t];
        }

    // Symmetric orthonormalization helper: W <- (W W^T)^{-1/2} W.
    auto orthonormalize = [&](std::vector<double>& w) {
        std::vector<double> m(r * r, 0.0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < r; ++k) s += w[i * r + k] * w[j * r + k];
                m[i * r + j] = s;
            }
        const SymEigen me = sym_eigen(m, r);
        std::vector<double> inv_sqrt(r * r, 0.0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < r; ++k) {
                    if (me.values[k] <= 0.0)
                        raise(ErrorCode::RankDeficient, "fast_ica: degenerate rotation");
                    s += me.vectors[i * r + k] * me.vectors[j * r + k] /
                         std::sqrt(me.values[k]);
                }
                inv_sqrt[i * r + j] = s;
            }
        std::vector<double> next(r * r, 0.0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < r; ++k) s += inv_sqrt[i * r + k] * w[k * r + j];
                next[i * r + j] = s;
            }
        w = std::move(next);
    };

    // Random orthonormal start, fixed by the seed.
    std::vector<double> w(r * r);
    Rng rng(derive_seed(seed, hash_tag("fastica")));
    for (double& v : w) v = rng.normal();
    orthonormalize(w);

    const int max_iter = 200;
    const double tol = 1e-4;
    d.converged = false;
    std::vector<double> w_new(r * r);
    std::vector<double> proj(n_t);
    for (int iter = 1; iter <= max_iter; ++iter) {
        // One fixed-point step for every row: w+ = E[z g(w.z)] - E[g'(w.z)] w.
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t t = 0; t < n_t; ++t) {
                double s = 0.0;
                for (std::size_t k = 0; k < r; ++k) s += w[i * r + k] * z[k][t];
                proj[t] = s;
            }
            double mean_gprime = 0.0;
            std::vector<double> zg(r, 0.0);
            for (std::size_t t = 0; t < n_t; ++t) {
                const double g = std::tanh(proj[t]);
                mean_gprime += 1.0 - g * g;
                for (std::size_t k = 0; k < r; ++k) zg[k] += z[k][t] * g;
            }
            const double inv_t = 1.0 / static_cast<double>(n_t);
            mean_gprime *= inv_t;
            for (std::size_t k = 0; k < r; ++k)
                w_new[i * r + k] = zg[k] * inv_t - mean_gprime * w[i * r + k];
        }
        orthonormalize(w_new);

        double delta = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t k = 0; k < r; ++k) dot += w_new[i * r + k] * w[i * r + k];
            delta = std::max(delta, std::fabs(1.0 - std::fabs(dot)));
        }
        w = w_new;
        d.iterations = iter;
        d.final_delta = delta;
        if (delta < tol) {
            d.converged = true;
            break;
        }
    }

    // Canonical component order and sign: strongest channel-space projection
    // first; each mixing column's largest-magnitude entry positive.
    // Mixing A = E_r D^{1/2} W^T (channel x component).
    std::vector<double> mixing(n_ch * r, 0.0);
    for (std::size_t c = 0; c < n_ch; ++c)
        for (std::size_t j = 0; j < r; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < r; ++k)
                s += eig.vectors[c * n_ch + k] * std::sqrt(eig.values[k]) * w[j * r + k];
            mixing[c * r + j] = s;
        }

    std::vector<std::size_t> order(r);
    std::vector<double> strength(r, 0.0);
    for (std::size_t j = 0; j < r; ++j) {
        for (std::size_t c = 0; c < n_ch; ++c)
            strength[j] += mixing[c * r + j] * mixing[c * r + j];
        order[j] = j;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return strength[a] > strength[b]; });

    std::vector<double> sign(r, 1.0);
    for (std::size_t j = 0; j < r; ++j) {
        double best = 0.0;
        for (std::size_t c = 0; c < n_ch; ++c) {
            const double v = mixing[c * r + j];
            if (std::fabs(v) > std::fabs(best)) best = v;
        }
        if (best < 0.0) sign[j] = -1.0;
    }

    d.mixing.assign(n_ch * r, 0.0);
    d.unmixing.assign(r * n_ch, 0.0);
    for (std::size_t jj = 0; jj < r; ++jj) {
        const std::size_t j = order[jj];
        for (std::size_t c = 0; c < n_ch; ++c)
            d.mixing[c * r + jj] = sign[j] * mixing[c * r + j];
        // Unmixing U = W K (component x channel).
        for (std::size_t c = 0; c < n_ch; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < r; ++k) s += w[j * r + k] * d.whitening[k * n_ch + c];
            d.unmixing[jj * n_ch + c] = sign[j] * s;
        }
    }

    // Activations S = U x (component x time).
    d.activations.assign(r, std::vector<double>(n_t, 0.0));
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t c = 0; c < n_ch; ++c) {
            const double u = d.unmixing[j * n_ch + c];
            if (u == 0.0) continue;
            const std::vector<double>& row = x[c];
            std::vector<double>& target = d.activations[j];
            for (std::size_t t = 0; t < n_t; ++t) target[t] += u * row[t];
        }
    return d;
}

Recording remove_components(const Recording& rec, const IcaDecomposition& decomp,
                            const std::vector<std::size_t>& drop) {
    if (decomp.n_channels != rec.channels.size() ||
        rec.n_samples() != (decomp.activations.empty() ? 0 : decomp.activations[0].size()))
        raise(ErrorCode::PreconditionViolated,
              "remove_components: decomposition does not match recording");
    std::set<std::size_t> dropped;
    for (std::size_t idx : drop) {
        if (idx >= decomp.n_components)
            raise(ErrorCode::IndexOutOfRange,
                  "component index " + std::to_string(idx) + " out of range (have " +
                      std::to_string(decomp.n_components) + ")");
        dropped.insert(idx);
    }

    const std::size_t n_ch = decomp.n_channels;
    const std::size_t n_t = rec.n_samples();
    const std::size_t r = decomp.n_components;

    Recording out = rec;
    for (std::size_t c = 0; c < n_ch; ++c)
        std::fill(out.samples[c].begin(), out.samples[c].end(), decomp.channel_means[c]);
    for (std::size_t j = 0; j < r; ++j) {
        if (dropped.count(j)) continue;
        const std::vector<double>& act = decomp.activations[j];
        for (std::size_t c = 0; c < n_ch; ++c) {
            const double a = decomp.mixing[c * r + j];
            if (a == 0.0) continue;
            std::vector<double>& target = out.samples[c];
            for (std::size_t t = 0; t < n_t; ++t) target[t] += a * act[t];
        }
    }
    return out;
}

std::vector<Epoch> extract_epochs(const Recording& rec, double window_start_ms,
                                  double window_end_ms) {
    if (!(window_start_ms < 0.0) || !(window_end_ms > 0.0))
        raise(ErrorCode::InvalidSpec, "epoch window must straddle the event");
    const double rate = rec.sample_rate_hz;
    const std::int64_t pre =
        static_cast<std::int64_t>(std::llround(-window_start_ms / 1000.0 * rate));
    const std::int64_t len = static_cast<std::int64_t>(
        std::llround((window_end_ms - window_start_ms) / 1000.0 * rate));

    std::vector<Epoch> epochs;
    epochs.reserve(rec.events.size());
    for (const EventMarker& ev : rec.events) {
        const std::int64_t start = ev.sample_index - pre;
        if (start < 0 || start + len > static_cast<std::int64_t>(rec.n_samples()))
            raise(ErrorCode::WindowOutOfRange,
                  "trial '" + ev.trial_id + "': epoch window [" + std::to_string(start) +
                      ", " + std::to_string(start + len) + ") outside recording of " +
                      std::to_string(rec.n_samples()) + " samples");
        Epoch e;
        e.participant_id = rec.participant_id;
        e.trial_id = ev.trial_id;
        e.clip_id = ev.clip_id;
        e.condition = ev.condition;
        e.channels = rec.channels;
        e.sample_rate_hz = rate;
        e.window_start_ms = window_start_ms;
        e.window_end_ms = window_end_ms;
        e.baseline_corrected = false;
        e.samples.reserve(rec.channels.size());
        for (const auto& channel : rec.samples)
            e.samples.emplace_back(channel.begin() + start, channel.begin() + start + len);
        epochs.push_back(std::move(e));
    }
    return epochs;
}

Epoch baseline_correct(const Epoch& epoch) {
    if (epoch.baseline_corrected)
        raise(ErrorCode::AlreadyCorrected,
              "trial '" + epoch.trial_id + "' is already baseline-corrected");
    const std::size_t pre = epoch.event_offset();
    if (pre == 0 || pre > epoch.n_samples())
        raise(ErrorCode::PreconditionViolated, "epoch has no baseline region");

    Epoch out = epoch;
    for (auto& channel : out.samples) {
        double mean = 0.0;
        for (std::size_t t = 0; t < pre; ++t) mean += channel[t];
        mean /= static_cast<double>(pre);
        for (double& v : channel) v -= mean;
    }
    out.baseline_corrected = true;
    return out;
}

RejectionResult reject_epochs(const std::vector<Epoch>& epochs, double threshold_uv) {
    RejectionResult result;
    for (const Epoch& e : epochs) {
        if (!e.baseline_corrected)
            raise(ErrorCode::NotBaselineCorrected,
                  "trial '" + e.trial_id + "' must be baseline-corrected before rejection");
        bool reject = false;
        for (const auto& channel : e.samples) {
            const auto [lo, hi] = std::minmax_element(channel.begin(), channel.end());
            if (*hi - *lo > threshold_uv) {
                reject = true;
                break;
            }
        }
        if (reject) result.rejected_trial_ids.push_back(e.trial_id);
        else result.retained.push_back(e);
    }
    return result;
}

} // namespace hazerp
