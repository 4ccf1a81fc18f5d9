#include "hsir/vs2m.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "hsir/errors.hpp"

namespace hsir {

VS2MModel VS2MModel::init(CubeDims dims, std::size_t endmembers, std::uint64_t seed,
                          const SpatialArchitecture& spatial_arch, const SpectralArchitecture& spectral_arch) {
    if (endmembers < 1) throw ContractError("VS2MModel: need at least one endmember");
    if (dims.size() == 0) throw ContractError("VS2MModel: dimensions must be positive");
    VS2MModel model;
    model.dims_ = dims;
    model.spatial_.reserve(endmembers);
    model.spectral_.reserve(endmembers);
    for (std::size_t r = 0; r < endmembers; ++r) {
        auto spatial_weights = make_rng(seed, 4 * r + 0);
        auto spatial_latent = make_rng(seed, 4 * r + 1);
        auto spectral_weights = make_rng(seed, 4 * r + 2);
        auto spectral_latent = make_rng(seed, 4 * r + 3);
        model.spatial_.emplace_back(dims.rows, dims.cols, spatial_arch, spatial_weights, spatial_latent);
        model.spectral_.emplace_back(dims.bands, spectral_arch, spectral_weights, spectral_latent);
    }
    return model;
}

std::span<const double> VS2MModel::block(std::size_t b) const {
    const std::size_t r = endmembers();
    return b < r ? spatial_.at(b).parameters() : spectral_.at(b - r).parameters();
}

std::span<double> VS2MModel::block(std::size_t b) {
    const std::size_t r = endmembers();
    return b < r ? spatial_.at(b).parameters() : spectral_.at(b - r).parameters();
}

std::size_t VS2MModel::parameter_count() const {
    std::size_t total = 0;
    for (std::size_t b = 0; b < block_count(); ++b) total += block(b).size();
    return total;
}

// ---------------------------------------------------------------------------

std::vector<double> outer_sum(const CubeDims& dims, std::span<const std::vector<double>> maps,
                              std::span<const std::vector<double>> spectra) {
    if (maps.size() != spectra.size()) throw ContractError("outer_sum: factor count mismatch");
    const std::size_t pixels = dims.pixels();
    std::vector<double> cube(dims.size(), 0.0);
    for (std::size_t r = 0; r < maps.size(); ++r) {
        if (maps[r].size() != pixels || spectra[r].size() != dims.bands) {
            throw ContractError("outer_sum: factor shape mismatch");
        }
        for (std::size_t k = 0; k < dims.bands; ++k) {
            const double c = spectra[r][k];
            double* band = cube.data() + k * pixels;
            for (std::size_t p = 0; p < pixels; ++p) band[p] += maps[r][p] * c;
        }
    }
    return cube;
}

namespace {

struct ModelForward {
    std::vector<SpatialGenerator::Recorded> spatial;
    std::vector<std::vector<double>> maps;
    std::vector<std::vector<double>> spectra;
    std::vector<double> cube;
};

ModelForward forward(const VS2MModel& model) {
    ModelForward fwd;
    for (std::size_t r = 0; r < model.endmembers(); ++r) {
        fwd.spatial.push_back(model.spatial(r).record());
        fwd.maps.push_back(fwd.spatial.back().output);
        fwd.spectra.push_back(model.spectral(r).eval());
    }
    fwd.cube = outer_sum(model.dims(), fwd.maps, fwd.spectra);
    return fwd;
}

void check_target(const VS2MModel& model, std::span<const double> x_t) {
    if (x_t.size() != model.dims().size()) {
        throw ContractError("vs2m: target has " + std::to_string(x_t.size()) + " values, model produces " +
                            std::to_string(model.dims().size()));
    }
}

CubeObjective residual_objective(std::span<const double> x_t, double a_t) {
    return [x_t, a_t](std::span<const double> cube, std::span<double> d_cube) {
        double total = 0.0;
        for (std::size_t n = 0; n < cube.size(); ++n) {
            const double e = x_t[n] - a_t * cube[n];
            total += e * e;
            d_cube[n] = -2.0 * a_t * e;
        }
        return total;
    };
}

} // namespace

std::vector<double> compose(const VS2MModel& model) {
    std::vector<std::vector<double>> maps, spectra;
    for (std::size_t r = 0; r < model.endmembers(); ++r) {
        maps.push_back(model.spatial(r).eval());
        spectra.push_back(model.spectral(r).eval());
    }
    return outer_sum(model.dims(), maps, spectra);
}

double loss(const VS2MModel& model, std::span<const double> x_t, double a_t) {
    check_target(model, x_t);
    if (!(a_t > 0.0)) throw ContractError("loss: signal coefficient must be positive");
    const auto cube = compose(model);
    double total = 0.0;
    for (std::size_t n = 0; n < cube.size(); ++n) {
        const double e = x_t[n] - a_t * cube[n];
        total += e * e;
    }
    return total;
}

ModelGradient gradient(const VS2MModel& model, const CubeObjective& objective) {
    const auto fwd = forward(model);
    const auto& dims = model.dims();
    const std::size_t pixels = dims.pixels();
    std::vector<double> d_cube(fwd.cube.size(), 0.0);

    ModelGradient grad;
    grad.loss = objective(fwd.cube, d_cube);
    grad.blocks.resize(model.block_count());
    for (std::size_t b = 0; b < model.block_count(); ++b) grad.blocks[b].assign(model.block(b).size(), 0.0);

    const std::size_t R = model.endmembers();
    for (std::size_t r = 0; r < R; ++r) {
        std::vector<double> d_map(pixels, 0.0);
        std::vector<double> d_spectrum(dims.bands, 0.0);
        for (std::size_t k = 0; k < dims.bands; ++k) {
            const double c = fwd.spectra[r][k];
            const double* g = d_cube.data() + k * pixels;
            double acc = 0.0;
            for (std::size_t p = 0; p < pixels; ++p) {
                d_map[p] += g[p] * c;
                acc += g[p] * fwd.maps[r][p];
            }
            d_spectrum[k] = acc;
        }
        model.spatial(r).backward(fwd.spatial[r], d_map, grad.blocks[r]);
        model.spectral(r).accumulate_gradient(d_spectrum, grad.blocks[R + r]);
    }
    return grad;
}

ModelGradient gradient(const VS2MModel& model, std::span<const double> x_t, double a_t) {
    check_target(model, x_t);
    if (!(a_t > 0.0)) throw ContractError("gradient: signal coefficient must be positive");
    return gradient(model, residual_objective(x_t, a_t));
}

// ---------------------------------------------------------------------------

void FitConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ContractError("FitConfig: learning_rate must be finite and >= 0");
    }
    if (iters_per_step < 1) throw ContractError("FitConfig: iters_per_step must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ContractError("FitConfig: Adam betas must lie in [0,1)");
    }
    if (!(adam_eps > 0.0)) throw ContractError("FitConfig: adam_eps must be positive");
}

AdamState AdamState::fresh(const VS2MModel& model) {
    AdamState state;
    for (std::size_t b = 0; b < model.block_count(); ++b) {
        state.first.emplace_back(model.block(b).size(), 0.0);
        state.second.emplace_back(model.block(b).size(), 0.0);
    }
    return state;
}

bool AdamState::matches(const VS2MModel& model) const {
    if (first.size() != model.block_count() || second.size() != model.block_count()) return false;
    for (std::size_t b = 0; b < model.block_count(); ++b) {
        if (first[b].size() != model.block(b).size() || second[b].size() != model.block(b).size()) return false;
    }
    return true;
}

void adam_update(VS2MModel& model, const ModelGradient& grad, const FitConfig& cfg, AdamState& state) {
    if (!state.matches(model)) throw ContractError("adam_update: optimizer state does not match model layout");
    ++state.updates;
    const double t = static_cast<double>(state.updates);
    const double correction1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.adam_beta2, t);
    for (std::size_t b = 0; b < model.block_count(); ++b) {
        auto params = model.block(b);
        auto& m = state.first[b];
        auto& v = state.second[b];
        const auto& g = grad.blocks[b];
        for (std::size_t n = 0; n < params.size(); ++n) {
            m[n] = cfg.adam_beta1 * m[n] + (1.0 - cfg.adam_beta1) * g[n];
            v[n] = cfg.adam_beta2 * v[n] + (1.0 - cfg.adam_beta2) * g[n] * g[n];
            const double m_hat = m[n] / correction1;
            const double v_hat = v[n] / correction2;
            params[n] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
        }
    }
}

FitReport fit(VS2MModel& model, const CubeObjective& objective, const FitConfig& cfg, AdamState& state) {
    cfg.validate();
    if (state.first.empty() && state.updates == 0) state = AdamState::fresh(model);
    if (!state.matches(model)) throw ContractError("fit: optimizer state does not match model layout");

    FitReport report;
    for (std::size_t it = 0; it < cfg.iters_per_step; ++it) {
        const auto grad = gradient(model, objective);
        if (!std::isfinite(grad.loss)) throw NumericError("fit: non-finite loss", static_cast<long>(it));
        for (const auto& block : grad.blocks) {
            for (const double g : block) {
                if (!std::isfinite(g)) throw NumericError("fit: non-finite gradient", static_cast<long>(it));
            }
        }
        if (it == 0) report.first_loss = grad.loss;
        report.last_loss = grad.loss;
        adam_update(model, grad, cfg, state);
    }
    return report;
}

FitReport fit(VS2MModel& model, std::span<const double> x_t, double a_t, const FitConfig& cfg, AdamState& state) {
    check_target(model, x_t);
    if (!(a_t > 0.0)) throw ContractError("fit: signal coefficient must be positive");
    return fit(model, residual_objective(x_t, a_t), cfg, state);
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::span<const double> values) {
    for (const double v : values) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int byte = 0; byte < 8; ++byte) {
            h ^= (bits >> (8 * byte)) & 0xFFu;
            h *= 0x100000001B3ULL;
        }
    }
    return h;
}

constexpr std::uint64_t fnv_offset = 0xCBF29CE484222325ULL;

std::string checkpoint_header(const VS2MModel& model) {
    const auto& d = model.dims();
    return "VS2MCKPT v1 R=" + std::to_string(model.endmembers()) + " I=" + std::to_string(d.rows) +
           " J=" + std::to_string(d.cols) + " K=" + std::to_string(d.bands) +
           " params=" + std::to_string(model.parameter_count()) + " dtype=f32\n";
}

} // namespace

std::uint64_t parameter_hash(const VS2MModel& model) {
    std::uint64_t h = fnv_offset;
    for (std::size_t b = 0; b < model.block_count(); ++b) h = fnv1a(h, model.block(b));
    return h;
}

std::uint64_t latent_hash(const VS2MModel& model) {
    std::uint64_t h = fnv_offset;
    for (std::size_t r = 0; r < model.endmembers(); ++r) {
        h = fnv1a(h, model.spatial(r).latent().data);
        h = fnv1a(h, model.spectral(r).latent());
    }
    return h;
}

void save_checkpoint(const VS2MModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    const auto header = checkpoint_header(model);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (std::size_t b = 0; b < model.block_count(); ++b) {
        for (const double v : model.block(b)) {
            auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
            char bytes[4];
            for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
            out.write(bytes, 4);
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void load_checkpoint(VS2MModel& model, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint " + path.string());
    std::string line;
    std::getline(in, line);
    if (line + "\n" != checkpoint_header(model)) throw ParseError("checkpoint header does not match model layout");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != 4 * model.parameter_count()) throw ParseError("checkpoint payload has wrong length");
    std::size_t pos = 0;
    for (std::size_t b = 0; b < model.block_count(); ++b) {
        for (auto& v : model.block(b)) {
            std::uint32_t bits = 0;
            for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
            pos += 4;
            v = static_cast<double>(std::bit_cast<float>(bits));
        }
    }
}

} // namespace hsir
