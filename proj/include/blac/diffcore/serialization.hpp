#pragma once

#include <iosfwd>
#include <string>

#include "blac/diffcore/mlp.hpp"

namespace blac::diff {

// Text format:
//   mlp <num_layers>
//   widths <w0> <w1> ... <wL>
//   activations <a1> ... <aL>
//   then per layer the weight matrix (row-major) and bias, one value per
//   token, written with 17 significant digits so values round-trip exactly.

void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);

void save_mlp(const std::string& path, const Mlp& net);
Mlp load_mlp(const std::string& path);

}  // namespace blac::diff
