#include "gdsr/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace gdsr {

double psnr(const ImageGrid& a, const ImageGrid& b, double peak) {
    require_same_shape(a, b);
    if (peak <= 0.0) throw std::invalid_argument("invalid range: peak must be > 0");
    const double mse = l2_norm_sq(a, b) / static_cast<double>(a.size());
    if (mse == 0.0) return 99.0;
    const double v = 10.0 * std::log10(peak * peak / mse);
    return std::clamp(v, 0.0, 99.0);
}

double ssim(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b);
    constexpr int kWin = 8;
    constexpr double kPeak = 1.0;
    constexpr double c1 = (0.01 * kPeak) * (0.01 * kPeak);
    constexpr double c2 = (0.03 * kPeak) * (0.03 * kPeak);
    const int h = a.height(), w = a.width();
    if (h < kWin || w < kWin) throw std::invalid_argument("too small");

    // summed-area tables over a, b, a^2, b^2, a*b
    const int sw = w + 1;
    auto idx = [sw](int r, int c) { return static_cast<size_t>(r) * sw + c; };
    std::vector<double> sa(static_cast<size_t>(h + 1) * sw, 0.0), sb = sa, saa = sa,
                        sbb = sa, sab = sa;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double va = a.at(r, c), vb = b.at(r, c);
            sa[idx(r + 1, c + 1)] = va + sa[idx(r, c + 1)] + sa[idx(r + 1, c)] - sa[idx(r, c)];
            sb[idx(r + 1, c + 1)] = vb + sb[idx(r, c + 1)] + sb[idx(r + 1, c)] - sb[idx(r, c)];
            saa[idx(r + 1, c + 1)] = va * va + saa[idx(r, c + 1)] + saa[idx(r + 1, c)] - saa[idx(r, c)];
            sbb[idx(r + 1, c + 1)] = vb * vb + sbb[idx(r, c + 1)] + sbb[idx(r + 1, c)] - sbb[idx(r, c)];
            sab[idx(r + 1, c + 1)] = va * vb + sab[idx(r, c + 1)] + sab[idx(r + 1, c)] - sab[idx(r, c)];
        }
    auto box = [&](const std::vector<double>& s, int r, int c) {
        return s[idx(r + kWin, c + kWin)] - s[idx(r, c + kWin)] - s[idx(r + kWin, c)] +
               s[idx(r, c)];
    };

    const double n = kWin * kWin;
    double total = 0.0;
    int count = 0;
    for (int r = 0; r + kWin <= h; ++r)
        for (int c = 0; c + kWin <= w; ++c) {
            const double ma = box(sa, r, c) / n, mb = box(sb, r, c) / n;
            const double va = box(saa, r, c) / n - ma * ma;
            const double vb = box(sbb, r, c) / n - mb * mb;
            const double cov = box(sab, r, c) / n - ma * mb;
            const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            total += num / den;
            ++count;
        }
    return total / count;
}

}  // namespace gdsr
