#pragma once

#include <ostream>

#include "hashtran/hashing.hpp"
#include "records.hpp"

namespace hashtran::detail {

void write_transform_records(std::ostream &out, const HashingTransform &t);
HashingTransform read_transform_records(records::Reader &reader);

} // namespace hashtran::detail
