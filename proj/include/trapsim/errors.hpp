#pragma once

#include <stdexcept>
#include <string>

namespace trapsim {

// Error families, one exit-code class each (see tools/main.cpp).
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration: unknown keys, missing units, inconsistent layout input.
struct config_error : error {
  using error::error;
};

// Input outside a function's mathematical domain (z <= 0, negative mass, ...).
struct domain_error : error {
  using error::error;
};

// Iterative solver failed to converge, or landed on a saddle/degenerate point.
struct convergence_error : error {
  using error::error;
};

// Linear chain lost radial stability (linear-to-zigzag transition).
struct structural_error : error {
  using error::error;
};

// A staged operation was entered with its precondition unmet.
struct precondition_error : error {
  using error::error;
};

struct io_error : error {
  using error::error;
};

}  // namespace trapsim
