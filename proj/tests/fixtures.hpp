#pragma once

#include <string>

#include "trapsim/layout_io.hpp"

#ifndef TRAPSIM_SOURCE_DIR
#error "tests must be compiled with -DTRAPSIM_SOURCE_DIR=..."
#endif

namespace fixtures {

inline std::string source_dir() { return TRAPSIM_SOURCE_DIR; }

inline trapsim::layout_io::LoadedLayout canonical() {
  return trapsim::layout_io::load_layout(source_dir() + "/data/canonical.lay");
}

}  // namespace fixtures
