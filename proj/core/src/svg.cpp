#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "vipaint/harness.hpp"

namespace vipaint {

namespace {

constexpr double kSize = 480.0;
constexpr double kPad = 24.0;

struct Frame {
    double lo[2];
    double hi[2];
    double px(double x) const { return kPad + (x - lo[0]) / (hi[0] - lo[0]) * (kSize - 2 * kPad); }
    double py(double y) const { return kSize - kPad - (y - lo[1]) / (hi[1] - lo[1]) * (kSize - 2 * kPad); }
};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

std::string scatter_svg(const SampleSet& reference, const SampleSet& samples, const MeasurementOp& op, const Vec& y,
                        const std::string& title) {
    require(op.input_dim() == 2, "scatter plots need two-dimensional signals");
    Frame f{{1e300, 1e300}, {-1e300, -1e300}};
    for (const SampleSet* set : {&reference, &samples}) {
        for (const Vec& x : *set) {
            for (int d = 0; d < 2; ++d) {
                if (!std::isfinite(x[d])) continue;
                f.lo[d] = std::min(f.lo[d], x[d]);
                f.hi[d] = std::max(f.hi[d], x[d]);
            }
        }
    }
    for (int d = 0; d < 2; ++d) {
        if (f.lo[d] > f.hi[d]) f.lo[d] = -1, f.hi[d] = 1;
        const double margin = std::max(0.1 * (f.hi[d] - f.lo[d]), 0.5);
        f.lo[d] -= margin;
        f.hi[d] += margin;
    }

    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize << "\" viewBox=\"0 0 "
       << kSize << ' ' << kSize << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kSize - 2 * kPad << "\" height=\""
       << kSize - 2 * kPad << "\" fill=\"none\" stroke=\"#888\"/>\n";
    os << "<text x=\"" << kPad << "\" y=\"16\" font-family=\"sans-serif\" font-size=\"12\">" << escape(title) << "</text>\n";

    // Observation constraints a . x = y_r, clipped to the frame.
    const Mat a = op.matrix();
    os << "<g stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\">\n";
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double a0 = a(r, 0), a1 = a(r, 1), b = y[r];
        double x0, y0, x1, y1;
        if (std::abs(a1) > std::abs(a0)) {
            x0 = f.lo[0], x1 = f.hi[0];
            y0 = (b - a0 * x0) / a1, y1 = (b - a0 * x1) / a1;
        } else if (a0 != 0.0) {
            y0 = f.lo[1], y1 = f.hi[1];
            x0 = (b - a1 * y0) / a0, x1 = (b - a1 * y1) / a0;
        } else {
            continue;
        }
        os << "<line x1=\"" << f.px(x0) << "\" y1=\"" << f.py(y0) << "\" x2=\"" << f.px(x1) << "\" y2=\"" << f.py(y1)
           << "\"/>\n";
    }
    os << "</g>\n";
    os << "<g fill=\"#7f7f7f\" fill-opacity=\"0.35\">\n";
    for (const Vec& x : reference) os << "<circle cx=\"" << f.px(x[0]) << "\" cy=\"" << f.py(x[1]) << "\" r=\"2\"/>\n";
    os << "</g>\n<g fill=\"#1f77b4\" fill-opacity=\"0.8\">\n";
    for (const Vec& x : samples)
        if (x.allFinite()) os << "<circle cx=\"" << f.px(x[0]) << "\" cy=\"" << f.py(x[1]) << "\" r=\"3\"/>\n";
    os << "</g>\n</svg>\n";
    return os.str();
}

} // namespace vipaint
