#pragma once

// Exact CRPS of piecewise-linear quantile pieces by polynomial antiderivatives,
// in any floating type. Used as an independent oracle for the closed form.

#include "isqf/quantile_function.hpp"

#include <span>

namespace isqf::oracle {

// Exact integral of 2 (alpha - I)(z - q(alpha)) for linear q on [l, r] with a
// fixed indicator I, via the polynomial antiderivative.
template <class T>
T exact_piece(T l, T r, T ql, T qr, T z) {
    if (!(r > l)) return 0;
    const T m = (qr - ql) / (r - l);
    const T c = z - ql + m * l;  // z - q(alpha) = c - m*alpha
    const T ind = (z < (ql + qr) / 2) ? 1 : 0;
    auto F = [&](T a) { return 2 * (c * a * a / 2 - m * a * a * a / 3 - ind * c * a + ind * m * a * a / 2); };
    return F(r) - F(l);
}

template <class T = double>
T exact_pieces_crps(std::span<const double> d, std::span<const double> p, double z_in) {
    const T z = z_in;
    T total = 0;
    for (std::size_t s = 0; s + 1 < d.size(); ++s) {
        const T d0 = d[s], d1 = d[s + 1], p0 = p[s], p1 = p[s + 1];
        if (p0 < z && z < p1) {
            const T x = d0 + (z - p0) / (p1 - p0) * (d1 - d0);
            total += exact_piece<T>(d0, x, p0, z, z) + exact_piece<T>(x, d1, z, p1, z);
        } else {
            total += exact_piece<T>(d0, d1, p0, p1, z);
        }
    }
    return total;
}

inline double exact_segment_crps(const SplineSegment& seg, double z) {
    return exact_pieces_crps(seg.positions(), seg.values(), z);
}

} // namespace isqf::oracle
