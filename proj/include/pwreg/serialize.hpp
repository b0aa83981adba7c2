#pragma once

#include <string>

#include "pwreg/coherence.hpp"
#include "pwreg/optimizer.hpp"
#include "pwreg/potential.hpp"
#include "pwreg/transform.hpp"

namespace pwreg {

/// json checkpoints for the trainable state. Numbers round-trip exactly
/// (shortest-representation doubles), so save/load/save is byte-stable.

std::string net_to_json(const PotentialNet& net, const AdamState* adam = nullptr);
PotentialNet net_from_json(const std::string& text, AdamState* adam = nullptr);

std::string transform_to_json(const TransformParams& theta);
TransformParams transform_from_json(const std::string& text);

std::string nystrom_to_json(const NystromFactor& factor);
NystromFactor nystrom_from_json(const std::string& text);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace pwreg
