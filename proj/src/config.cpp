#include "ctmar/config.hpp"

#include <algorithm>
#include <fstream>
#include <vector>

#include "json.hpp"

namespace ctmar {

using nlohmann::json;

namespace {

struct ConfigError : ValidationError {
    using ValidationError::ValidationError;
};

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
                return it.key() == k;
            }) == allowed.end()) {
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
        }
    }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

void get_optional(const json& j, const char* key, std::optional<double>& out) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
        out.reset();
    } else {
        out = j.at(key).get<double>();
    }
}

PhantomKind phantom_kind_from(const std::string& s) {
    if (s == "shepp_logan") return PhantomKind::shepp_logan;
    if (s == "random_ellipses") return PhantomKind::random_ellipses;
    throw ConfigError("config: unknown phantom kind '" + s + "'");
}

std::string to_string(PhantomKind k) {
    return k == PhantomKind::shepp_logan ? "shepp_logan" : "random_ellipses";
}

MetalShape metal_shape_from(const std::string& s) {
    if (s == "disc") return MetalShape::disc;
    if (s == "capsule") return MetalShape::capsule;
    if (s == "polygon") return MetalShape::polygon;
    throw ConfigError("config: unknown metal shape '" + s + "'");
}

std::string to_string(MetalShape s) {
    switch (s) {
        case MetalShape::disc: return "disc";
        case MetalShape::capsule: return "capsule";
        case MetalShape::polygon: return "polygon";
    }
    return "disc";
}

FbpFilter fbp_filter_from(const std::string& s) {
    if (s == "ram_lak") return FbpFilter::ram_lak;
    if (s == "hann_windowed_ram_lak") return FbpFilter::hann_windowed_ram_lak;
    throw ConfigError("config: unknown fbp filter '" + s + "'");
}

std::string to_string(FbpFilter f) {
    return f == FbpFilter::ram_lak ? "ram_lak" : "hann_windowed_ram_lak";
}

ProxKind prox_kind_from(const std::string& s) {
    if (s == "identity") return ProxKind::identity;
    if (s == "nonneg") return ProxKind::nonneg;
    if (s == "tv") return ProxKind::tv;
    if (s == "soft_threshold") return ProxKind::soft_threshold;
    throw ConfigError("config: unknown prox kind '" + s + "'");
}

std::string to_string(ProxKind k) {
    switch (k) {
        case ProxKind::identity: return "identity";
        case ProxKind::nonneg: return "nonneg";
        case ProxKind::tv: return "tv";
        case ProxKind::soft_threshold: return "soft_threshold";
    }
    return "identity";
}

ProxSpec parse_prox(const json& j, const std::string& where) {
    check_keys(j, where, {"kind", "strength", "inner_iters"});
    ProxSpec spec;
    if (j.contains("kind")) spec.kind = prox_kind_from(j.at("kind").get<std::string>());
    get_if(j, "strength", spec.strength);
    get_if(j, "inner_iters", spec.inner_iters);
    return spec;
}

json prox_to_json(const ProxSpec& spec) {
    return json{{"kind", to_string(spec.kind)},
                {"strength", spec.strength},
                {"inner_iters", spec.inner_iters}};
}

Geometry parse_geometry(const json& j) {
    check_keys(j, "geometry",
               {"image_h", "image_w", "n_views", "n_bins", "pixel_size", "detector_spacing", "beam"});
    Geometry defaults{256, 256, 320, 367};
    int h = defaults.image_h, w = defaults.image_w;
    int views = defaults.n_views, bins = defaults.n_bins;
    double px = defaults.pixel_size;
    double spacing = 0.0;  // derive unless given
    get_if(j, "image_h", h);
    get_if(j, "image_w", w);
    get_if(j, "n_views", views);
    get_if(j, "n_bins", bins);
    get_if(j, "pixel_size", px);
    get_if(j, "detector_spacing", spacing);
    if (j.contains("beam") && j.at("beam").get<std::string>() != "parallel") {
        throw ConfigError("config: only parallel beam geometry is supported");
    }
    return Geometry(h, w, views, bins, px, spacing);
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: bad JSON: ") + e.what());
    }
    check_keys(j, "config",
               {"seed", "output_dir", "geometry", "fbp", "phantom", "metal", "corruption", "nmar",
                "solver", "display"});
    ExperimentConfig cfg;
    get_if(j, "seed", cfg.seed);
    get_if(j, "output_dir", cfg.output_dir);
    if (j.contains("geometry")) cfg.geometry = parse_geometry(j.at("geometry"));

    if (j.contains("fbp")) {
        const json& f = j.at("fbp");
        check_keys(f, "fbp", {"filter", "pad_factor"});
        if (f.contains("filter")) cfg.fbp.filter = fbp_filter_from(f.at("filter").get<std::string>());
        get_if(f, "pad_factor", cfg.fbp.pad_factor);
    }
    if (j.contains("phantom")) {
        const json& p = j.at("phantom");
        check_keys(p, "phantom", {"kind", "seed", "n_ellipses", "attenuation_lo", "attenuation_hi"});
        if (p.contains("kind")) cfg.phantom.kind = phantom_kind_from(p.at("kind").get<std::string>());
        get_if(p, "seed", cfg.phantom.seed);
        get_if(p, "n_ellipses", cfg.phantom.n_ellipses);
        get_if(p, "attenuation_lo", cfg.phantom.attenuation_lo);
        get_if(p, "attenuation_hi", cfg.phantom.attenuation_hi);
    }
    if (j.contains("metal")) {
        const json& m = j.at("metal");
        check_keys(m, "metal", {"seed", "n_implants", "shapes", "size_lo", "size_hi", "metal_mu"});
        get_if(m, "seed", cfg.metal.seed);
        get_if(m, "n_implants", cfg.metal.n_implants);
        if (m.contains("shapes")) {
            cfg.metal.shapes.clear();
            for (const auto& s : m.at("shapes")) {
                cfg.metal.shapes.push_back(metal_shape_from(s.get<std::string>()));
            }
        }
        get_if(m, "size_lo", cfg.metal.size_lo);
        get_if(m, "size_hi", cfg.metal.size_hi);
        get_if(m, "metal_mu", cfg.metal.metal_mu);
    }
    if (j.contains("corruption")) {
        const json& c = j.at("corruption");
        check_keys(c, "corruption", {"spectrum", "photons_i0", "seed", "intensity_floor"});
        if (c.contains("spectrum")) {
            cfg.corruption.spectrum.clear();
            for (const auto& b : c.at("spectrum")) {
                check_keys(b, "corruption.spectrum[]", {"weight", "tissue_scale", "metal_scale"});
                SpectrumBin bin;
                get_if(b, "weight", bin.weight);
                get_if(b, "tissue_scale", bin.tissue_scale);
                get_if(b, "metal_scale", bin.metal_scale);
                cfg.corruption.spectrum.push_back(bin);
            }
        }
        get_optional(c, "photons_i0", cfg.corruption.photons_i0);
        get_if(c, "seed", cfg.corruption.seed);
        get_if(c, "intensity_floor", cfg.corruption.intensity_floor);
    }
    if (j.contains("nmar")) {
        const json& n = j.at("nmar");
        check_keys(n, "nmar",
                   {"air_threshold", "bone_threshold", "water_value", "smooth_sigma", "eps_rel"});
        get_if(n, "air_threshold", cfg.nmar.air_threshold);
        get_if(n, "bone_threshold", cfg.nmar.bone_threshold);
        get_if(n, "water_value", cfg.nmar.water_value);
        get_if(n, "smooth_sigma", cfg.nmar.smooth_sigma);
        get_if(n, "eps_rel", cfg.nmar.eps_rel);
    }
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        check_keys(s, "solver",
                   {"n_stages", "alpha", "eta1", "eta2", "prox_s", "prox_x", "record_stages"});
        get_if(s, "n_stages", cfg.solver.n_stages);
        get_if(s, "alpha", cfg.solver.alpha);
        get_optional(s, "eta1", cfg.solver.eta1);
        get_optional(s, "eta2", cfg.solver.eta2);
        if (s.contains("prox_s")) cfg.solver.prox_s = parse_prox(s.at("prox_s"), "solver.prox_s");
        if (s.contains("prox_x")) cfg.solver.prox_x = parse_prox(s.at("prox_x"), "solver.prox_x");
        get_if(s, "record_stages", cfg.solver.record_stages);
    }
    if (j.contains("display")) {
        const json& d = j.at("display");
        check_keys(d, "display", {"mu_water", "window_lo_hu", "window_hi_hu"});
        get_if(d, "mu_water", cfg.display.hu.mu_water);
        get_if(d, "window_lo_hu", cfg.display.window_lo_hu);
        get_if(d, "window_hi_hu", cfg.display.window_hi_hu);
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    j["geometry"] = {{"image_h", cfg.geometry.image_h},
                     {"image_w", cfg.geometry.image_w},
                     {"n_views", cfg.geometry.n_views},
                     {"n_bins", cfg.geometry.n_bins},
                     {"pixel_size", cfg.geometry.pixel_size},
                     {"detector_spacing", cfg.geometry.detector_spacing},
                     {"beam", "parallel"}};
    j["fbp"] = {{"filter", to_string(cfg.fbp.filter)}, {"pad_factor", cfg.fbp.pad_factor}};
    j["phantom"] = {{"kind", to_string(cfg.phantom.kind)},
                    {"seed", cfg.phantom.seed},
                    {"n_ellipses", cfg.phantom.n_ellipses},
                    {"attenuation_lo", cfg.phantom.attenuation_lo},
                    {"attenuation_hi", cfg.phantom.attenuation_hi}};
    json shapes = json::array();
    for (MetalShape s : cfg.metal.shapes) shapes.push_back(to_string(s));
    j["metal"] = {{"seed", cfg.metal.seed},   {"n_implants", cfg.metal.n_implants},
                  {"shapes", shapes},         {"size_lo", cfg.metal.size_lo},
                  {"size_hi", cfg.metal.size_hi}, {"metal_mu", cfg.metal.metal_mu}};
    json spectrum = json::array();
    for (const SpectrumBin& b : cfg.corruption.spectrum) {
        spectrum.push_back({{"weight", b.weight},
                            {"tissue_scale", b.tissue_scale},
                            {"metal_scale", b.metal_scale}});
    }
    j["corruption"] = {{"spectrum", spectrum},
                       {"photons_i0", cfg.corruption.photons_i0
                                          ? json(*cfg.corruption.photons_i0)
                                          : json(nullptr)},
                       {"seed", cfg.corruption.seed},
                       {"intensity_floor", cfg.corruption.intensity_floor}};
    j["nmar"] = {{"air_threshold", cfg.nmar.air_threshold},
                 {"bone_threshold", cfg.nmar.bone_threshold},
                 {"water_value", cfg.nmar.water_value},
                 {"smooth_sigma", cfg.nmar.smooth_sigma},
                 {"eps_rel", cfg.nmar.eps_rel}};
    j["solver"] = {{"n_stages", cfg.solver.n_stages},
                   {"alpha", cfg.solver.alpha},
                   {"eta1", cfg.solver.eta1 ? json(*cfg.solver.eta1) : json(nullptr)},
                   {"eta2", cfg.solver.eta2 ? json(*cfg.solver.eta2) : json(nullptr)},
                   {"prox_s", prox_to_json(cfg.solver.prox_s)},
                   {"prox_x", prox_to_json(cfg.solver.prox_x)},
                   {"record_stages", cfg.solver.record_stages}};
    j["display"] = {{"mu_water", cfg.display.hu.mu_water},
                    {"window_lo_hu", cfg.display.window_lo_hu},
                    {"window_hi_hu", cfg.display.window_hi_hu}};
    return j.dump(2) + "\n";
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("config: cannot write " + path.string());
    out << config_to_json(cfg);
}

}  // namespace ctmar
