#pragma once

#include <iosfwd>
#include <string>

#include "cclsc/nn.hpp"

namespace cclsc {

// Text checkpoint, version 1:
//
//   cclsc-checkpoint 1
//   seed <uint64>
//   layers <L>
//   then L blocks, embedding layers first and the classifier last:
//     layer <out> <in> <relu|linear>
//     <out lines of <in> weights, row-major>
//     <one line of <out> biases>
//   end
//
// Values are printed with 17 significant digits so they round-trip exactly.

void write_checkpoint(std::ostream& out, const Network<double>& net);
Network<double> read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const Network<double>& net);
Network<double> load_checkpoint(const std::string& path);

}  // namespace cclsc
