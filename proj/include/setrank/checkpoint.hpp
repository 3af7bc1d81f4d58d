// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "setrank/tensor.hpp"

namespace setrank {

/// One named tensor in a checkpoint. Records round-trip bit-exactly; the
/// byte layout is documented in docs/checkpoint_format.md.
struct TensorRecord {
  std::string name;
  Shape shape;
  ArrayX values;
};

void save_records(std::ostream& out, const std::vector<TensorRecord>& records);
std::vector<TensorRecord> load_records(std::istream& in);

void save_records(const std::string& path,
                  const std::vector<TensorRecord>& records);
std::vector<TensorRecord> load_records(const std::string& path);

}  // namespace setrank
