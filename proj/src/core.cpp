#include "ctmar/core.hpp"

#include <algorithm>
#include <sstream>

namespace ctmar {

namespace {

void check_finite(std::span<const double> data, const char* what) {
    if (!all_finite(data)) {
        throw ValidationError(std::string(what) + ": data contains non-finite values");
    }
}

}  // namespace

Geometry::Geometry(int h, int w, int views, int bins, double px, double spacing)
    : image_h(h), image_w(w), n_bins(bins), n_views(views), detector_spacing(spacing), pixel_size(px) {
    if (h < 8 || w < 8) {
        std::ostringstream os;
        os << "geometry: image dimensions must be at least 8x8, got " << h << "x" << w;
        throw ValidationError(os.str());
    }
    if (bins < 3) throw ValidationError("geometry: n_bins must be at least 3");
    if (views < 1) throw ValidationError("geometry: n_views must be at least 1");
    if (!(px > 0.0) || !std::isfinite(px)) throw ValidationError("geometry: pixel_size must be positive");
    if (detector_spacing <= 0.0) {
        detector_spacing = 1.02 * diagonal() / n_bins;
    }
    if (!std::isfinite(detector_spacing)) throw ValidationError("geometry: detector_spacing must be finite");
    if (detector_span() < diagonal()) {
        std::ostringstream os;
        os << "geometry: detector span " << detector_span() << " does not cover the image diagonal "
           << diagonal();
        throw ValidationError(os.str());
    }
}

Image::Image(int height, int width, double pixel_size, std::vector<double> data)
    : height_(height), width_(width), pixel_size_(pixel_size), data_(std::move(data)) {
    if (height_ < 8 || width_ < 8) {
        std::ostringstream os;
        os << "image: dimensions must be at least 8x8, got " << height_ << "x" << width_;
        throw ValidationError(os.str());
    }
    if (!(pixel_size_ > 0.0) || !std::isfinite(pixel_size_)) {
        throw ValidationError("image: pixel_size must be positive and finite");
    }
    if (static_cast<std::int64_t>(data_.size()) != size()) {
        std::ostringstream os;
        os << "image: data length " << data_.size() << " != " << height_ << "*" << width_;
        throw ValidationError(os.str());
    }
    check_finite(data_, "image");
}

Image Image::zeros(int height, int width, double pixel_size) {
    return Image(height, width, pixel_size,
                 std::vector<double>(static_cast<std::size_t>(height) * width, 0.0));
}

Sinogram::Sinogram(int bins, int views, double detector_spacing, std::vector<double> data)
    : bins_(bins), views_(views), detector_spacing_(detector_spacing), data_(std::move(data)) {
    if (bins_ < 1 || views_ < 1) {
        std::ostringstream os;
        os << "sinogram: dimensions must be positive, got " << bins_ << "x" << views_;
        throw ValidationError(os.str());
    }
    if (!(detector_spacing_ > 0.0) || !std::isfinite(detector_spacing_)) {
        throw ValidationError("sinogram: detector_spacing must be positive and finite");
    }
    if (static_cast<std::int64_t>(data_.size()) != size()) {
        std::ostringstream os;
        os << "sinogram: data length " << data_.size() << " != " << bins_ << "*" << views_;
        throw ValidationError(os.str());
    }
    check_finite(data_, "sinogram");
}

Sinogram Sinogram::zeros(int bins, int views, double detector_spacing) {
    return Sinogram(bins, views, detector_spacing,
                    std::vector<double>(static_cast<std::size_t>(bins) * views, 0.0));
}

std::vector<double> Sinogram::view_angles() const {
    std::vector<double> a(views_);
    for (int v = 0; v < views_; ++v) a[v] = view_angle(v);
    return a;
}

void validate_pair(const Image& img, const Sinogram& sino, const Geometry& geo) {
    auto fail = [](const char* dim, long long got, long long want) {
        std::ostringstream os;
        os << "shape mismatch: " << dim << " is " << got << ", geometry expects " << want;
        throw ValidationError(os.str());
    };
    if (img.height() != geo.image_h) fail("image height", img.height(), geo.image_h);
    if (img.width() != geo.image_w) fail("image width", img.width(), geo.image_w);
    if (sino.bins() != geo.n_bins) fail("sinogram bins", sino.bins(), geo.n_bins);
    if (sino.views() != geo.n_views) fail("sinogram views", sino.views(), geo.n_views);
}

namespace {

std::vector<double> binarize_raw(std::span<const double> in, double threshold) {
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > threshold ? 1.0 : 0.0;
    return out;
}

}  // namespace

Image binarize(const Image& img, double threshold) {
    if (!std::isfinite(threshold)) throw ValidationError("binarize: threshold must be finite");
    return Image(img.height(), img.width(), img.pixel_size(), binarize_raw(img.data(), threshold));
}

Sinogram binarize(const Sinogram& sino, double threshold) {
    if (!std::isfinite(threshold)) throw ValidationError("binarize: threshold must be finite");
    return Sinogram(sino.bins(), sino.views(), sino.detector_spacing(),
                    binarize_raw(sino.data(), threshold));
}

bool is_binary(std::span<const double> data) {
    return std::all_of(data.begin(), data.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double max_value(std::span<const double> a) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : a) m = std::max(m, v);
    return m;
}

double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace ctmar
