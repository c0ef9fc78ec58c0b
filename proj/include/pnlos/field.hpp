#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnlos {

using cplx = std::complex<double>;

/**
 * A 2-D grid of complex amplitudes with a physical pixel pitch and the
 * wavelength it is sampled at. Row-major storage, index (y, x).
 *
 * Invariants: height, width >= 2; pitch > 0; wavelength > 0.
 */
class ComplexField {
  public:
    ComplexField(int height, int width, double pitch_m, double wavelength_m,
                 cplx fill = cplx{0.0, 0.0})
        : height_(height), width_(width), pitch_(pitch_m), wavelength_(wavelength_m),
          data_(static_cast<size_t>(height > 0 ? height : 0) *
                    static_cast<size_t>(width > 0 ? width : 0),
                fill) {
        if (height_ < 2 || width_ < 2)
            throw std::invalid_argument("ComplexField: grid must be at least 2x2, got " +
                                        std::to_string(height_) + "x" + std::to_string(width_));
        if (!(pitch_ > 0.0))
            throw std::invalid_argument("ComplexField: pitch must be positive");
        if (!(wavelength_ > 0.0))
            throw std::invalid_argument("ComplexField: wavelength must be positive");
    }

    /// Zero field with the same grid geometry as `other`.
    static ComplexField like(const ComplexField& other) {
        return ComplexField(other.height_, other.width_, other.pitch_, other.wavelength_);
    }

    int height() const { return height_; }
    int width() const { return width_; }
    double pitch() const { return pitch_; }
    double wavelength() const { return wavelength_; }
    size_t size() const { return data_.size(); }

    cplx& at(int y, int x) { return data_[static_cast<size_t>(y) * width_ + x]; }
    const cplx& at(int y, int x) const { return data_[static_cast<size_t>(y) * width_ + x]; }

    std::vector<cplx>& samples() { return data_; }
    const std::vector<cplx>& samples() const { return data_; }

    /// Total energy, sum of |u|^2 over all samples.
    double energy() const {
        double e = 0.0;
        for (const cplx& v : data_) e += std::norm(v);
        return e;
    }

    bool all_finite() const {
        for (const cplx& v : data_)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }

    /// Throws if any sample is NaN/Inf; `what` names the field in the message.
    void require_finite(const char* what) const {
        if (!all_finite())
            throw std::invalid_argument(std::string(what) + ": field contains non-finite samples");
    }

    bool same_grid(const ComplexField& other) const {
        return height_ == other.height_ && width_ == other.width_ && pitch_ == other.pitch_ &&
               wavelength_ == other.wavelength_;
    }

  private:
    int height_;
    int width_;
    double pitch_;
    double wavelength_;
    std::vector<cplx> data_;
};

/**
 * A grid of nonnegative intensity samples (detector counts, arbitrary
 * linear units) with a physical pixel pitch. Unlike ComplexField a 1-row
 * frame is allowed; metric code slices frames into thin strips.
 */
class IntensityFrame {
  public:
    IntensityFrame(int height, int width, double pitch_m, double fill = 0.0)
        : height_(height), width_(width), pitch_(pitch_m),
          data_(static_cast<size_t>(height > 0 ? height : 0) *
                    static_cast<size_t>(width > 0 ? width : 0),
                fill) {
        if (height_ < 1 || width_ < 1)
            throw std::invalid_argument("IntensityFrame: grid must be at least 1x1");
        if (!(pitch_ > 0.0))
            throw std::invalid_argument("IntensityFrame: pitch must be positive");
    }

    int height() const { return height_; }
    int width() const { return width_; }
    double pitch() const { return pitch_; }
    size_t size() const { return data_.size(); }

    double& at(int y, int x) { return data_[static_cast<size_t>(y) * width_ + x]; }
    const double& at(int y, int x) const { return data_[static_cast<size_t>(y) * width_ + x]; }

    std::vector<double>& samples() { return data_; }
    const std::vector<double>& samples() const { return data_; }

    double sum() const {
        double s = 0.0;
        for (double v : data_) s += v;
        return s;
    }

    bool valid() const {
        for (double v : data_)
            if (!(v >= 0.0) || !std::isfinite(v)) return false;
        return true;
    }

    bool same_grid(const IntensityFrame& other) const {
        return height_ == other.height_ && width_ == other.width_ && pitch_ == other.pitch_;
    }

  private:
    int height_;
    int width_;
    double pitch_;
    std::vector<double> data_;
};

/// Elementwise squared modulus. The frame sum equals the field energy.
inline IntensityFrame intensity(const ComplexField& field) {
    IntensityFrame frame(field.height(), field.width(), field.pitch());
    const auto& in = field.samples();
    auto& out = frame.samples();
    for (size_t i = 0; i < in.size(); ++i) out[i] = std::norm(in[i]);
    return frame;
}

} // namespace pnlos
