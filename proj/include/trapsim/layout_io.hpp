#pragma once

#include <string>

#include "trapsim/trapmodel.hpp"

namespace trapsim::layout_io {

// Layout file: one record per line.
//   patch  <label> <x1> <x2> <y1> <y2>     (lengths with unit suffix: um, mm, m)
//   cutout <label> <x1> <x2> <y1> <y2>
//   hole   <x> <y>
//   rf     <voltage> <frequency>           (V suffix; MHz/kHz/Hz)
//   dc     <label> <voltage>
// '#' starts a comment. All parse/validation errors are collected and
// reported together.
struct LoadedLayout {
  trapmodel::ElectrodeLayout layout;
  trapmodel::TrapDrive drive;
};

LoadedLayout load_layout(const std::string& path);
LoadedLayout parse_layout(const std::string& text, const std::string& origin = "<string>");

}  // namespace trapsim::layout_io
