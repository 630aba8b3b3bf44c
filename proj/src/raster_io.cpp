#include "ctmar/raster_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ctmar {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RasterKind kind) {
    switch (kind) {
        case RasterKind::image: return "image";
        case RasterKind::sinogram: return "sinogram";
        case RasterKind::mask: return "mask";
        case RasterKind::trace: return "trace";
    }
    throw IoError("raster: unknown kind");
}

RasterKind raster_kind_from_string(const std::string& s) {
    if (s == "image") return RasterKind::image;
    if (s == "sinogram") return RasterKind::sinogram;
    if (s == "mask") return RasterKind::mask;
    if (s == "trace") return RasterKind::trace;
    throw IoError("raster: unknown kind '" + s + "'");
}

namespace {

void atomic_write(const fs::path& path, const std::string& bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("raster: cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("raster: short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string sidecar_json(const RasterMeta& meta) {
    json j;
    j["kind"] = to_string(meta.kind);
    j["dims"] = {meta.rows, meta.cols};
    j["spacing"] = meta.spacing;
    j["units"] = meta.units;
    json seeds = json::object();
    for (const auto& [name, value] : meta.seeds) seeds[name] = value;
    j["seeds"] = seeds;
    j["creator"] = meta.creator;
    return j.dump(2) + "\n";
}

RasterMeta parse_sidecar(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("raster: missing sidecar " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw IoError("raster: bad sidecar " + path.string() + ": " + e.what());
    }
    static const std::vector<std::string> allowed = {"kind", "dims", "spacing",
                                                     "units", "seeds", "creator"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            throw IoError("raster: unknown sidecar key '" + it.key() + "' in " + path.string());
        }
    }
    RasterMeta meta;
    try {
        meta.kind = raster_kind_from_string(j.at("kind").get<std::string>());
        const auto dims = j.at("dims");
        if (!dims.is_array() || dims.size() != 2) throw IoError("raster: dims must be [rows, cols]");
        meta.rows = dims[0].get<int>();
        meta.cols = dims[1].get<int>();
        meta.spacing = j.at("spacing").get<double>();
        meta.units = j.at("units").get<std::string>();
        for (auto it = j.at("seeds").begin(); it != j.at("seeds").end(); ++it) {
            meta.seeds.emplace_back(it.key(), it.value().get<std::int64_t>());
        }
        meta.creator = j.value("creator", std::string{});
    } catch (const json::exception& e) {
        throw IoError("raster: bad sidecar " + path.string() + ": " + e.what());
    }
    return meta;
}

std::string payload_bytes(std::span<const double> data) {
    std::string bytes(data.size() * sizeof(float), '\0');
    float* out = reinterpret_cast<float*>(bytes.data());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = static_cast<float>(data[i]);
    return bytes;
}

std::vector<double> read_payload(const fs::path& path, std::int64_t expected) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("raster: cannot open " + path.string());
    const std::streamsize size = in.tellg();
    const std::streamsize want = expected * static_cast<std::streamsize>(sizeof(float));
    if (size != want) {
        std::ostringstream os;
        os << "raster: payload " << path.string() << " holds " << size << " bytes, sidecar dims need "
           << want;
        throw IoError(os.str());
    }
    std::vector<float> raw(static_cast<std::size_t>(expected));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(raw.data()), want);
    if (!in) throw IoError("raster: short read from " + path.string());
    std::vector<double> data(raw.begin(), raw.end());
    return data;
}

fs::path sidecar_path(const fs::path& path) { return path.string() + ".json"; }

void write_common(const fs::path& path, std::span<const double> data, const RasterMeta& meta) {
    if (static_cast<std::int64_t>(data.size()) !=
        static_cast<std::int64_t>(meta.rows) * meta.cols) {
        throw IoError("raster: meta dims do not match the raster");
    }
    atomic_write(path, payload_bytes(data));
    atomic_write(sidecar_path(path), sidecar_json(meta));
}

}  // namespace

void write_raster(const fs::path& path, const Image& img, RasterMeta meta) {
    if (meta.kind != RasterKind::image && meta.kind != RasterKind::mask) {
        throw IoError("raster: image payloads need kind image or mask");
    }
    meta.rows = img.height();
    meta.cols = img.width();
    meta.spacing = img.pixel_size();
    write_common(path, img.data(), meta);
}

void write_raster(const fs::path& path, const Sinogram& sino, RasterMeta meta) {
    if (meta.kind != RasterKind::sinogram && meta.kind != RasterKind::trace) {
        throw IoError("raster: sinogram payloads need kind sinogram or trace");
    }
    meta.rows = sino.bins();
    meta.cols = sino.views();
    meta.spacing = sino.detector_spacing();
    write_common(path, sino.data(), meta);
}

std::pair<Image, RasterMeta> read_image(const fs::path& path) {
    RasterMeta meta = parse_sidecar(sidecar_path(path));
    if (meta.kind != RasterKind::image && meta.kind != RasterKind::mask) {
        throw IoError("raster: " + path.string() + " is a " + to_string(meta.kind) +
                      ", expected an image kind");
    }
    std::vector<double> data = read_payload(path, static_cast<std::int64_t>(meta.rows) * meta.cols);
    return {Image(meta.rows, meta.cols, meta.spacing, std::move(data)), std::move(meta)};
}

std::pair<Sinogram, RasterMeta> read_sinogram(const fs::path& path) {
    RasterMeta meta = parse_sidecar(sidecar_path(path));
    if (meta.kind != RasterKind::sinogram && meta.kind != RasterKind::trace) {
        throw IoError("raster: " + path.string() + " is a " + to_string(meta.kind) +
                      ", expected a sinogram kind");
    }
    std::vector<double> data = read_payload(path, static_cast<std::int64_t>(meta.rows) * meta.cols);
    return {Sinogram(meta.rows, meta.cols, meta.spacing, std::move(data)), std::move(meta)};
}

void export_pgm(const Image& img, double lo, double hi, const fs::path& path) {
    if (!(lo < hi)) throw ValidationError("pgm: window requires lo < hi");
    std::ostringstream os;
    os << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
    std::string bytes = os.str();
    bytes.reserve(bytes.size() + static_cast<std::size_t>(img.size()) * 2);
    const double scale = 65535.0 / (hi - lo);
    for (double v : img.data()) {
        const double t = std::clamp((v - lo) * scale, 0.0, 65535.0);
        const auto q = static_cast<std::uint16_t>(std::lround(t));
        bytes.push_back(static_cast<char>(q >> 8));  // big-endian sample order
        bytes.push_back(static_cast<char>(q & 0xff));
    }
    atomic_write(path, bytes);
}

}  // namespace ctmar
