#pragma once

#include <string>
#include <vector>

#include "ia/data_model.hpp"
#include "ia/image_io.hpp"

namespace ia {

// Side-by-side qualitative panels: the base image first, then one overlay
// per map (alpha-blended jet colormap, weight proportional to the map value,
// so an all-zeros map reproduces the image exactly). Maps of other sizes are
// bilinearly upsampled to the image first. Caption strip on top; bytes are
// deterministic for fixed inputs.
Image render_panels(const Image& base, const std::vector<AttentionMap>& maps,
                    const std::vector<std::string>& labels);

void save_panels_png(const std::string& path, const Image& base,
                     const std::vector<AttentionMap>& maps,
                     const std::vector<std::string>& labels);

// Jet-style colormap, v in [0,1].
void colormap_jet(double v, std::uint8_t rgb[3]);

}  // namespace ia
