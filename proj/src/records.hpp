#pragma once

// Line-delimited JSON record helpers shared by the dataset, transform and
// checkpoint files. Internal to the library.

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hashtran/errors.hpp"

namespace hashtran::records {

using nlohmann::json;

class Reader {
public:
    explicit Reader(std::istream &in) : in_(in) {}

    // Next non-empty record; throws FormatError at end of input.
    json next(const char *expecting) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            if (line.empty()) continue;
            try {
                return json::parse(line);
            } catch (const json::parse_error &e) {
                throw FormatError(line_, std::string("malformed JSON: ") + e.what());
            }
        }
        throw FormatError(line_, std::string("unexpected end of file, expecting ") + expecting);
    }

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

    [[noreturn]] void fail(const std::string &what) const { throw FormatError(line_, what); }

    template <class T>
    T field(const json &rec, const char *key) const {
        if (!rec.contains(key)) fail(std::string("missing field '") + key + "'");
        try {
            return rec.at(key).get<T>();
        } catch (const json::exception &e) {
            fail(std::string("bad field '") + key + "': " + e.what());
        }
    }

private:
    std::istream &in_;
    std::size_t line_ = 0;
};

inline void write(std::ostream &out, const json &rec) { out << rec.dump() << '\n'; }

} // namespace hashtran::records
