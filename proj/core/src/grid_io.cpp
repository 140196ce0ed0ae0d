#include "gmtlab/grid_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

namespace gmtlab {

namespace {

constexpr char kMagic[16] = {'G', 'M', 'T', 'L', 'A', 'B', 'G', 'R',
                             'I', 'D', 'v', '1', '\0', '\0', '\0', '\0'};

static_assert(std::endian::native == std::endian::little,
              "grid binary writer assumes a little-endian host");

void write_header(std::ostream& os, const Grid& g, const char* kind) {
    os.write(kMagic, sizeof(kMagic));
    nlohmann::ordered_json h;
    h["n"] = g.n;
    h["N"] = g.N;
    h["L"] = g.L;
    h["origin"] = std::vector<double>(g.origin.begin(), g.origin.begin() + g.n);
    h["kind"] = kind;
    std::string s = h.dump();
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
    os.put('\n');
}

void write_values(std::ostream& os, const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

} // namespace

void write_grid_binary(std::ostream& os, const ScalarGridMeasure& m) {
    write_header(os, m.grid, "scalar");
    write_values(os, m.mass);
}

void write_grid_binary(std::ostream& os, const VectorGridMeasure& m) {
    write_header(os, m.grid, "vector");
    write_values(os, m.comp);
}

void write_grid_binary(std::ostream& os, const MatrixGridMeasure& m) {
    write_header(os, m.grid, "matrix");
    write_values(os, m.comp);
}

void write_grid_binary_file(const std::string& path, const AnyGridMeasure& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw input_error("cannot open for writing: " + path);
    std::visit([&](const auto& v) { write_grid_binary(os, v); }, m);
}

AnyGridMeasure read_grid_binary(std::istream& is) {
    char magic[16];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw input_error("grid binary: bad magic");
    std::string header;
    std::getline(is, header);
    nlohmann::json h = nlohmann::json::parse(header);
    Vec origin{};
    auto o = h.at("origin").get<std::vector<double>>();
    for (std::size_t i = 0; i < o.size() && i < 3; ++i) origin[i] = o[i];
    Grid g(h.at("n").get<int>(), h.at("N").get<int>(), h.at("L").get<double>(), origin);
    std::string kind = h.at("kind").get<std::string>();
    std::size_t comps = kind == "scalar" ? 1
                      : kind == "vector" ? static_cast<std::size_t>(g.n)
                      : kind == "matrix" ? static_cast<std::size_t>(g.n) * g.n
                                         : 0;
    if (comps == 0) throw input_error("grid binary: unknown kind '" + kind + "'");
    std::vector<double> vals(g.cells() * comps);
    is.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
    if (!is) throw input_error("grid binary: truncated value block");
    if (kind == "scalar") return ScalarGridMeasure(g, std::move(vals));
    if (kind == "vector") {
        VectorGridMeasure m(g);
        m.comp = std::move(vals);
        return m;
    }
    MatrixGridMeasure m(g);
    m.comp = std::move(vals);
    return m;
}

AnyGridMeasure read_grid_binary_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw input_error("cannot open for reading: " + path);
    return read_grid_binary(is);
}

} // namespace gmtlab
