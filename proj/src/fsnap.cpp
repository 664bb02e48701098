#include "mhdlab/fsnap.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mhdlab {

static_assert(std::endian::native == std::endian::little, "FSNAP1 IO assumes a little-endian host");

void write_fsnap(const FieldSnapshot& f, std::ostream& os) {
    const Grid& g = f.grid();
    nlohmann::ordered_json h;
    h["magic"] = "FSNAP1";
    h["nx"] = g.nx;
    h["ny"] = g.ny;
    h["nz"] = g.nz;
    h["nt"] = g.nt;
    h["box_length"] = {g.box_length[0], g.box_length[1], g.box_length[2]};
    h["dt"] = g.dt;
    h["t_start"] = g.t_start;
    h["components"] = f.components();
    h["field_name"] = f.name();
    os << h.dump() << '\n';
    os.write(reinterpret_cast<const char*>(f.values().data()), std::streamsize(f.values().size() * sizeof(double)));
    if (!os) throw std::runtime_error("FSNAP1 write failed");
}

void write_fsnap(const FieldSnapshot& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_fsnap(f, os);
}

FieldSnapshot read_fsnap(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("FSNAP1: missing header line");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("FSNAP1: bad header: ") + e.what());
    }
    if (!h.is_object() || h.value("magic", "") != "FSNAP1") throw ValidationError("FSNAP1: bad magic");
    Grid g;
    int comps = 0;
    std::string name;
    try {
        g.nx = h.at("nx").get<int>();
        g.ny = h.at("ny").get<int>();
        g.nz = h.at("nz").get<int>();
        g.nt = h.at("nt").get<int>();
        auto bl = h.at("box_length");
        if (!bl.is_array() || bl.size() != 3) throw ValidationError("FSNAP1: box_length must have 3 entries");
        for (int a = 0; a < 3; ++a) g.box_length[a] = bl[a].get<double>();
        g.dt = h.at("dt").get<double>();
        g.t_start = h.at("t_start").get<double>();
        comps = h.at("components").get<int>();
        name = h.at("field_name").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("FSNAP1: header field error: ") + e.what());
    }
    FieldSnapshot f(g, comps, name);
    const std::streamsize bytes = std::streamsize(f.values().size() * sizeof(double));
    is.read(reinterpret_cast<char*>(f.values().data()), bytes);
    if (is.gcount() != bytes) throw ValidationError("FSNAP1: payload shorter than header implies");
    if (is.peek() != std::char_traits<char>::eof()) throw ValidationError("FSNAP1: payload longer than header implies");
    f.require_finite();
    return f;
}

FieldSnapshot read_fsnap(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open " + path);
    return read_fsnap(is);
}

} // namespace mhdlab
