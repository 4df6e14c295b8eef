#pragma once

// Layer records for checkpoint files, one JSON object per line:
//   {"part": <name>, "index": i, "in": .., "out": .., "activation": "relu", "weights": [...], "bias": [...]}
// Weights are input-major (w[i*out + o]). nlohmann writes doubles in shortest
// round-trip form, so a reload is bit-exact.

#include <ostream>
#include <string>

#include "hashtran/nn/network.hpp"
#include "hashtran/nn/rowwise.hpp"
#include "records.hpp"

namespace hashtran::detail {

void write_network_records(std::ostream &out, const std::string &part, const nn::Network &net);
nn::Network read_network_records(records::Reader &reader, const std::string &part, std::size_t layers);

void write_rowwise_records(std::ostream &out, const std::string &part, const nn::RowwiseFirstLayer &layer);
nn::RowwiseFirstLayer read_rowwise_records(records::Reader &reader, const std::string &part, std::size_t rows);

} // namespace hashtran::detail
