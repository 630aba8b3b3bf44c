#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctmar {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad shapes, values or configuration. The CLI maps this to exit code 2.
struct ValidationError : Error {
    using Error::Error;
};

/// Failure while running a pipeline (fully traced view, diverged solve,
/// implant placement exhaustion, ...). CLI exit code 3.
struct PipelineError : Error {
    using Error::Error;
};

/// File format problems (truncated payload, bad sidecar, ...). CLI exit code 2.
struct IoError : Error {
    using Error::Error;
};

enum class Beam { parallel };

/// Projection configuration binding image and sinogram shapes.
///
/// The detector array is centered on the image and spans 1.02x the physical
/// image diagonal when the spacing is left to be derived, so no view is ever
/// truncated.
struct Geometry {
    int image_h = 0;
    int image_w = 0;
    int n_bins = 0;
    int n_views = 0;
    double detector_spacing = 0.0;
    double pixel_size = 1.0;
    Beam beam = Beam::parallel;

    /// Full-size default: 416x416 image, 641 bins, 640 views over 360 deg.
    Geometry() : Geometry(416, 416, 640, 641) {}

    /// spacing <= 0 derives the 1.02-diagonal detector span.
    Geometry(int h, int w, int views, int bins, double px = 1.0, double spacing = 0.0);

    /// Physical image diagonal.
    double diagonal() const {
        return pixel_size * std::hypot(static_cast<double>(image_h), static_cast<double>(image_w));
    }
    double detector_span() const { return detector_spacing * n_bins; }
    double view_angle(int v) const { return 2.0 * M_PI * v / n_views; }
};

/// H x W attenuation raster, row-major. Immutable after construction.
class Image {
  public:
    Image(int height, int width, double pixel_size, std::vector<double> data);

    static Image zeros(int height, int width, double pixel_size = 1.0);
    static Image zeros(const Geometry& g) { return zeros(g.image_h, g.image_w, g.pixel_size); }

    int height() const { return height_; }
    int width() const { return width_; }
    double pixel_size() const { return pixel_size_; }
    std::int64_t size() const { return static_cast<std::int64_t>(height_) * width_; }

    double operator()(int row, int col) const { return data_[static_cast<std::size_t>(row) * width_ + col]; }
    std::span<const double> data() const { return data_; }
    std::vector<double> copy_data() const { return data_; }

    bool same_shape(const Image& o) const {
        return height_ == o.height_ && width_ == o.width_ && pixel_size_ == o.pixel_size_;
    }

  private:
    int height_;
    int width_;
    double pixel_size_;
    std::vector<double> data_;
};

/// N_b x N_p raster in the Radon domain, row-major, indexed [bin][view].
/// View angles are uniform over [0, 2pi) by construction. Immutable.
class Sinogram {
  public:
    Sinogram(int bins, int views, double detector_spacing, std::vector<double> data);

    static Sinogram zeros(int bins, int views, double detector_spacing);
    static Sinogram zeros(const Geometry& g) { return zeros(g.n_bins, g.n_views, g.detector_spacing); }

    int bins() const { return bins_; }
    int views() const { return views_; }
    double detector_spacing() const { return detector_spacing_; }
    std::int64_t size() const { return static_cast<std::int64_t>(bins_) * views_; }

    double view_angle(int v) const { return 2.0 * M_PI * v / views_; }
    std::vector<double> view_angles() const;

    double operator()(int bin, int view) const { return data_[static_cast<std::size_t>(bin) * views_ + view]; }
    std::span<const double> data() const { return data_; }
    std::vector<double> copy_data() const { return data_; }

    bool same_shape(const Sinogram& o) const {
        return bins_ == o.bins_ && views_ == o.views_ && detector_spacing_ == o.detector_spacing_;
    }

  private:
    int bins_;
    int views_;
    double detector_spacing_;
    std::vector<double> data_;
};

/// Succeeds iff the image and sinogram shapes both match the geometry.
/// Throws ValidationError naming the offending dimension.
void validate_pair(const Image& img, const Sinogram& sino, const Geometry& geo);

/// 1 where value > threshold (strictly), else 0.
Image binarize(const Image& img, double threshold);
Sinogram binarize(const Sinogram& sino, double threshold);

bool is_binary(std::span<const double> data);

/// Affine HU <-> linear attenuation map, used only for display windows.
/// Default water attenuation is 0.192 per cm at the reference energy with a
/// 1 mm pixel pitch, i.e. 0.0192 per pixel unit.
struct HuMap {
    double mu_water = 0.0192;

    double to_mu(double hu) const { return mu_water * (1.0 + hu / 1000.0); }
    double to_hu(double mu) const { return 1000.0 * (mu - mu_water) / mu_water; }
};

// Small raster helpers shared across modules.
double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
double max_value(std::span<const double> a);
double max_abs(std::span<const double> a);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> a);

}  // namespace ctmar
