#pragma once

#include <array>
#include <string>

#include "fdsel/effectsize.hpp"
#include "fdsel/iwt.hpp"

namespace fdsel {

/// Perceptually ordered colormap (viridis anchors); luminance increases with x
/// in [0, 1].
std::array<int, 3> colormap(double x);

/// One panel per derivative order: adjusted (solid) and unadjusted (thin)
/// p-value functions, the alpha* threshold as a dashed line, selected
/// intervals shaded.
std::string pvalue_svg(const Grid& grid, const IwtResult& result);

/// G^2(t; Delta) heatmap per order, Delta increasing upwards, the
/// non-truncated triangle outlined, with a colour legend.
std::string heatmap_svg(const Grid& grid, const EffectSizeResult& result);

}  // namespace fdsel
