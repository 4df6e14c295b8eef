#include "layer_io.hpp"

#include <cmath>

namespace hashtran::detail {

using records::json;

namespace {

void write_layer(std::ostream &out, const std::string &part, std::size_t index, const nn::DenseLayer &l) {
    json rec;
    rec["part"] = part;
    rec["index"] = index;
    rec["in"] = l.in;
    rec["out"] = l.out;
    rec["activation"] = nn::activation_name(l.activation);
    rec["weights"] = l.weights;
    rec["bias"] = l.bias;
    records::write(out, rec);
}

nn::DenseLayer read_layer(records::Reader &reader, const std::string &part, std::size_t index) {
    const json rec = reader.next(("layer record for " + part).c_str());
    if (reader.field<std::string>(rec, "part") != part) reader.fail("expected a layer of part '" + part + "'");
    if (reader.field<std::size_t>(rec, "index") != index) reader.fail("layer records out of order");
    nn::DenseLayer l;
    l.in = reader.field<std::size_t>(rec, "in");
    l.out = reader.field<std::size_t>(rec, "out");
    try {
        l.activation = nn::activation_from_name(reader.field<std::string>(rec, "activation"));
    } catch (const std::invalid_argument &e) {
        reader.fail(e.what());
    }
    l.weights = reader.field<std::vector<double>>(rec, "weights");
    l.bias = reader.field<std::vector<double>>(rec, "bias");
    if (l.in == 0 || l.out == 0) reader.fail("layer with zero width");
    if (l.weights.size() != l.in * l.out) reader.fail("weight count does not match in x out");
    if (l.bias.size() != l.out) reader.fail("bias count does not match out");
    for (double v : l.weights)
        if (!std::isfinite(v)) reader.fail("non-finite weight");
    return l;
}

} // namespace

void write_network_records(std::ostream &out, const std::string &part, const nn::Network &net) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) write_layer(out, part, i, net.layers[i]);
}

nn::Network read_network_records(records::Reader &reader, const std::string &part, std::size_t layers) {
    nn::Network net;
    for (std::size_t i = 0; i < layers; ++i) {
        net.layers.push_back(read_layer(reader, part, i));
        if (i > 0 && net.layers[i].in != net.layers[i - 1].out) reader.fail("layer widths do not chain");
    }
    return net;
}

void write_rowwise_records(std::ostream &out, const std::string &part, const nn::RowwiseFirstLayer &layer) {
    for (std::size_t r = 0; r < layer.per_row.size(); ++r) write_layer(out, part, r, layer.per_row[r]);
}

nn::RowwiseFirstLayer read_rowwise_records(records::Reader &reader, const std::string &part, std::size_t rows) {
    nn::RowwiseFirstLayer layer;
    layer.rows = rows;
    for (std::size_t r = 0; r < rows; ++r) {
        layer.per_row.push_back(read_layer(reader, part, r));
        const auto &l = layer.per_row.back();
        if (r == 0) {
            layer.width = l.in;
            layer.units = l.out;
        } else if (l.in != layer.width || l.out != layer.units) {
            reader.fail("row-wise layers differ in shape");
        }
    }
    return layer;
}

} // namespace hashtran::detail
