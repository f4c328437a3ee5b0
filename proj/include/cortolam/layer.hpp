#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace cortolam {

/// Cortical layer with fixed ordinal encoding I=0 ... WM=6.
enum class LayerClass : int { I = 0, II, III, IV, V, VI, WM };

inline constexpr std::size_t kNumClasses = 7;

inline constexpr std::array<LayerClass, kNumClasses> kAllLayers = {
    LayerClass::I,  LayerClass::II, LayerClass::III, LayerClass::IV,
    LayerClass::V,  LayerClass::VI, LayerClass::WM};

constexpr int ordinal(LayerClass c) { return static_cast<int>(c); }

constexpr LayerClass layer_from_ordinal(int i) { return static_cast<LayerClass>(i); }

std::string_view layer_name(LayerClass c);

/// Case-insensitive parse of I..VI / WM. Returns nullopt for anything else.
std::optional<LayerClass> parse_layer(std::string_view token);

}  // namespace cortolam
