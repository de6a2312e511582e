#include "walkfeat/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace walkfeat {

namespace {

struct LineReader {
    const std::string& text;
    std::size_t pos = 0;
    int line_no = 0;  // 1-based number of the line last returned

    // Returns the next non-empty, non-comment line, stripped of trailing CR.
    // Returns false at end of input.
    bool next(std::string& out, char comment_char) {
        while (pos < text.size()) {
            std::size_t end = text.find('\n', pos);
            if (end == std::string::npos) end = text.size();
            std::string line = text.substr(pos, end - pos);
            pos = end + 1;
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::size_t first = line.find_first_not_of(" \t");
            if (first == std::string::npos) continue;
            if (line[first] == comment_char) continue;
            out = std::move(line);
            return true;
        }
        return false;
    }
};

[[noreturn]] void parse_fail(int line, const std::string& what) {
    throw DataError("parse error at line " + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& tok, int line) {
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) parse_fail(line, "non-numeric value '" + tok + "'");
        return v;
    } catch (const std::invalid_argument&) {
        parse_fail(line, "non-numeric value '" + tok + "'");
    } catch (const std::out_of_range&) {
        parse_fail(line, "numeric value out of range '" + tok + "'");
    }
}

long parse_int(const std::string& tok, int line) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        parse_fail(line, "expected integer, got '" + tok + "'");
    return v;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

// Appends the fan triangulation of a polygon given by mesh-vertex indices.
void emit_fan(std::vector<std::array<int, 3>>& faces, const std::vector<int>& poly, int line) {
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        std::array<int, 3> tri{poly[0], poly[static_cast<int>(k)], poly[k + 1]};
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            parse_fail(line, "degenerate face (repeated vertex index)");
        faces.push_back(tri);
    }
}

Mesh parse_off(const std::string& bytes) {
    Mesh mesh;
    LineReader reader{bytes};
    std::string line;

    if (!reader.next(line, '#')) throw DataError("parse error at line 1: empty OFF file");
    auto toks = split_ws(line);
    long nv = -1, nf = -1;
    if (toks.empty() || (toks[0] != "OFF" && toks[0] != "off"))
        parse_fail(reader.line_no, "malformed OFF header");
    if (toks.size() >= 3) {
        // Counts on the header line ("OFF nv nf ne").
        nv = parse_int(toks[1], reader.line_no);
        nf = parse_int(toks[2], reader.line_no);
    } else {
        if (!reader.next(line, '#')) parse_fail(reader.line_no, "missing OFF count line");
        auto counts = split_ws(line);
        if (counts.size() < 2) parse_fail(reader.line_no, "malformed OFF count line");
        nv = parse_int(counts[0], reader.line_no);
        nf = parse_int(counts[1], reader.line_no);
    }
    if (nv < 0 || nf < 0) parse_fail(reader.line_no, "negative counts in OFF header");

    mesh.vertices.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        if (!reader.next(line, '#'))
            parse_fail(reader.line_no + 1,
                       "missing vertex " + std::to_string(i) + " of " + std::to_string(nv));
        auto vt = split_ws(line);
        if (vt.size() < 3) parse_fail(reader.line_no, "vertex line needs 3 coordinates");
        mesh.vertices.emplace_back(parse_number(vt[0], reader.line_no),
                                   parse_number(vt[1], reader.line_no),
                                   parse_number(vt[2], reader.line_no));
    }

    for (long i = 0; i < nf; ++i) {
        if (!reader.next(line, '#'))
            parse_fail(reader.line_no + 1,
                       "missing face " + std::to_string(i) + " of " + std::to_string(nf));
        auto ft = split_ws(line);
        long cnt = parse_int(ft[0], reader.line_no);
        if (cnt < 3) parse_fail(reader.line_no, "face needs at least 3 vertices");
        if (static_cast<long>(ft.size()) < cnt + 1)
            parse_fail(reader.line_no, "face lists fewer indices than declared");
        std::vector<int> poly;
        for (long k = 1; k <= cnt; ++k) {
            long idx = parse_int(ft[static_cast<std::size_t>(k)], reader.line_no);
            if (idx < 0 || idx >= nv)
                parse_fail(reader.line_no, "face index " + std::to_string(idx) + " out of range");
            poly.push_back(static_cast<int>(idx));
        }
        emit_fan(mesh.faces, poly, reader.line_no);
    }

    if (mesh.faces.empty()) throw DataError("parse error: OFF file declares no faces");
    return mesh;
}

Mesh parse_obj(const std::string& bytes) {
    Mesh mesh;
    LineReader reader{bytes};
    std::string line;

    while (reader.next(line, '#')) {
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        const std::string& key = toks[0];
        if (key == "v") {
            if (toks.size() < 4) parse_fail(reader.line_no, "vertex line needs 3 coordinates");
            mesh.vertices.emplace_back(parse_number(toks[1], reader.line_no),
                                       parse_number(toks[2], reader.line_no),
                                       parse_number(toks[3], reader.line_no));
        } else if (key == "f") {
            if (toks.size() < 4) parse_fail(reader.line_no, "face needs at least 3 vertices");
            std::vector<int> poly;
            long nv = static_cast<long>(mesh.vertices.size());
            for (std::size_t k = 1; k < toks.size(); ++k) {
                // "i", "i/t", "i/t/n", "i//n": the position index ends at the
                // first '/'. Negative indices count back from the end.
                std::string tok = toks[k].substr(0, toks[k].find('/'));
                long idx = parse_int(tok, reader.line_no);
                long resolved = idx > 0 ? idx - 1 : nv + idx;
                if (idx == 0 || resolved < 0 || resolved >= nv)
                    parse_fail(reader.line_no,
                               "face index " + std::to_string(idx) + " out of range");
                poly.push_back(static_cast<int>(resolved));
            }
            emit_fan(mesh.faces, poly, reader.line_no);
        }
        // vn / vt / usemtl / o / g / s / mtllib are ignored: only positions matter here.
    }

    if (mesh.vertices.empty()) throw DataError("parse error: OBJ file has no vertices");
    if (mesh.faces.empty()) throw DataError("parse error: OBJ file has no faces");
    return mesh;
}

void append_coord(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

void validate_mesh(const Mesh& mesh) {
    if (mesh.vertices.size() < 3)
        throw DataError("mesh invariant violated: fewer than 3 vertices");
    if (mesh.faces.empty())
        throw DataError("mesh invariant violated: empty face list");
    const int nv = static_cast<int>(mesh.vertices.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        for (int idx : tri) {
            if (idx < 0 || idx >= nv)
                throw DataError("mesh invariant violated: face " + std::to_string(f) +
                                " index " + std::to_string(idx) + " out of range");
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw DataError("mesh invariant violated: face " + std::to_string(f) +
                            " has repeated vertex indices");
    }
}

Mesh parse_mesh(const std::string& bytes, MeshFormat format) {
    Mesh mesh = format == MeshFormat::OFF ? parse_off(bytes) : parse_obj(bytes);
    validate_mesh(mesh);
    return mesh;
}

std::string write_mesh(const Mesh& mesh, MeshFormat format) {
    validate_mesh(mesh);
    std::string out;
    out.reserve(mesh.vertices.size() * 48 + mesh.faces.size() * 24);
    if (format == MeshFormat::OFF) {
        out += "OFF\n";
        out += std::to_string(mesh.vertices.size()) + " " + std::to_string(mesh.faces.size()) +
               " 0\n";
        for (const auto& v : mesh.vertices) {
            append_coord(out, v.x());
            out += ' ';
            append_coord(out, v.y());
            out += ' ';
            append_coord(out, v.z());
            out += '\n';
        }
        for (const auto& f : mesh.faces) {
            out += "3 " + std::to_string(f[0]) + " " + std::to_string(f[1]) + " " +
                   std::to_string(f[2]) + "\n";
        }
    } else {
        for (const auto& v : mesh.vertices) {
            out += "v ";
            append_coord(out, v.x());
            out += ' ';
            append_coord(out, v.y());
            out += ' ';
            append_coord(out, v.z());
            out += '\n';
        }
        for (const auto& f : mesh.faces) {
            // OBJ indices are 1-based.
            out += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " +
                   std::to_string(f[2] + 1) + "\n";
        }
    }
    return out;
}

Mesh read_mesh_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open mesh file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_mesh(ss.str(), format_from_path(path));
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_mesh_file(const Mesh& mesh, const std::string& path) {
    std::string text = write_mesh(mesh, format_from_path(path));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << text;
    if (!out) throw DataError("write failed: " + path);
}

Adjacency build_adjacency(const Mesh& mesh) {
    validate_mesh(mesh);
    Adjacency adj;
    adj.neighbors.resize(mesh.vertices.size());
    for (const auto& f : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            int a = f[e], b = f[(e + 1) % 3];
            adj.neighbors[a].push_back(b);
            adj.neighbors[b].push_back(a);
        }
    }
    for (auto& list : adj.neighbors) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return adj;
}

Vec3 centroid(const Mesh& mesh) {
    Vec3 c = Vec3::Zero();
    for (const auto& v : mesh.vertices) c += v;
    return c / static_cast<double>(mesh.vertices.size());
}

double bounding_radius(const Mesh& mesh) {
    Vec3 c = centroid(mesh);
    double r = 0.0;
    for (const auto& v : mesh.vertices) r = std::max(r, (v - c).norm());
    return r;
}

Mesh normalize_mesh(const Mesh& mesh) {
    validate_mesh(mesh);
    Vec3 c = centroid(mesh);
    double r = 0.0;
    for (const auto& v : mesh.vertices) r = std::max(r, (v - c).norm());
    if (r < 1e-12)
        throw DataError("cannot normalize: all vertices coincide");
    Mesh out = mesh;
    for (auto& v : out.vertices) v = (v - c) / r;
    return out;
}

}  // namespace walkfeat
