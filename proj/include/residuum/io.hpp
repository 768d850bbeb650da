/*
 * residuum - residual-limb termination for articulated body meshes.
 *
 * Copyright 2026 The residuum Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#ifndef RESIDUUM_IO_HPP_
#define RESIDUUM_IO_HPP_

#include "residuum/body_model.hpp"
#include "residuum/core_types.hpp"
#include "residuum/error.hpp"
#include "residuum/layout.hpp"
#include "residuum/metrics.hpp"
#include "residuum/synth.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace residuum::io {

// Insertion-ordered so documents list their sections in a fixed, readable order.
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

// Largest accepted mask side, in pixels.
inline constexpr long long kMaxMaskSide = 1 << 16;

namespace detail {

inline std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& path, std::string_view data)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) {
        throw Error(ErrorCode::IoError, "short write to " + path.string());
    }
}

inline int line_of(std::string_view text, std::size_t byte)
{
    byte = std::min(byte, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

/**
 * Parses a JSON document. For malformed or truncated text the error names
 * the line and the last top-level section that had started, plus the
 * expected sections that never appear.
 */
inline json parse_document(const std::string& text, const fs::path& path, const std::vector<std::string>& sections)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const int line = line_of(text, e.byte == 0 ? 0 : e.byte - 1);
        std::string started;
        std::size_t started_at = 0;
        std::vector<std::string> missing;
        for (const std::string& s : sections) {
            const auto at = text.find("\"" + s + "\"");
            if (at == std::string::npos) {
                missing.push_back(s);
            } else if (started.empty() || at > started_at) {
                started = s;
                started_at = at;
            }
        }
        std::string msg = path.string() + ":" + std::to_string(line) + ": malformed document";
        if (!started.empty()) {
            msg += " in section '" + started + "'";
        }
        if (!missing.empty()) {
            msg += "; missing section";
            msg += missing.size() > 1 ? "s" : "";
            for (std::size_t i = 0; i < missing.size(); ++i) {
                msg += (i == 0 ? " '" : ", '") + missing[i] + "'";
            }
        }
        throw Error(ErrorCode::ParseError, msg);
    }
}

// Typed access with field-path context in the error message.
class Reader {
public:
    Reader(const json& doc, std::string file) : doc_(doc), file_(std::move(file)) {}

    const json& at(const json& node, const std::string& key, const std::string& where) const
    {
        if (!node.is_object() || !node.contains(key)) {
            fail(where.empty() ? key : where + "." + key, "missing section '" + key + "'");
        }
        return node.at(key);
    }

    template <class T>
    T get(const json& node, const std::string& where) const
    {
        try {
            return node.get<T>();
        } catch (const json::exception& e) {
            fail(where, std::string("wrong type (") + e.what() + ")");
        }
    }

    double number(const json& node, const std::string& where) const
    {
        if (!node.is_number()) {
            fail(where, "expected a number");
        }
        return node.get<double>();
    }

    int integer(const json& node, const std::string& where) const
    {
        if (!node.is_number_integer()) {
            fail(where, "expected an integer");
        }
        return node.get<int>();
    }

    const json& array(const json& node, const std::string& where, std::size_t expected = 0) const
    {
        if (!node.is_array()) {
            fail(where, "expected an array");
        }
        if (expected != 0 && node.size() != expected) {
            fail(where, "expected " + std::to_string(expected) + " entries, found " + std::to_string(node.size()));
        }
        return node;
    }

    Vec3 vec3(const json& node, const std::string& where) const
    {
        array(node, where, 3);
        return Vec3(number(node[0], where + "[0]"), number(node[1], where + "[1]"), number(node[2], where + "[2]"));
    }

    void check_header(const std::string& kind) const
    {
        const json& v = at(doc_, "schema_version", "");
        if (!v.is_number_integer()) {
            fail("schema_version", "expected an integer");
        }
        if (v.get<int>() != kSchemaVersion) {
            throw Error(ErrorCode::SchemaVersionMismatch, file_ + ": schema_version " + std::to_string(v.get<int>()) +
                                                              ", expected " + std::to_string(kSchemaVersion));
        }
        if (doc_.contains("kind") && doc_["kind"] != kind) {
            fail("kind", "expected '" + kind + "'");
        }
    }

    [[noreturn]] void fail(const std::string& where, const std::string& what) const
    {
        throw Error(ErrorCode::ParseError, file_ + ": field '" + where + "': " + what);
    }

    const json& doc() const { return doc_; }
    const std::string& file() const { return file_; }

private:
    const json& doc_;
    std::string file_;
};

// Re-raises invariant violations found while building objects as parse errors.
template <class F>
auto as_parse_error(const std::string& file, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const Error& e) {
        switch (e.code()) {
        case ErrorCode::ParseError:
        case ErrorCode::SchemaVersionMismatch:
        case ErrorCode::WrongSlotCount:
        case ErrorCode::NonOrthonormalRotation:
        case ErrorCode::IoError:
            throw;
        default:
            throw Error(ErrorCode::ParseError, file + ": " + std::string(e.what()), e.indices());
        }
    }
}

inline json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

} // namespace detail

// ---------------------------------------------------------------- OBJ ----

/// Coordinates are printed with `digits` significant digits (9 by default).
inline std::string format_obj(const TriangleMesh& mesh, int digits = 9)
{
    std::string out;
    out.reserve(mesh.num_vertices() * 40 + mesh.num_faces() * 24);
    char buf[128];
    for (const Vec3& v : mesh.vertices()) {
        std::snprintf(buf, sizeof buf, "v %.*g %.*g %.*g\n", digits, v.x(), digits, v.y(), digits, v.z());
        out += buf;
    }
    for (const Face& f : mesh.faces()) {
        std::snprintf(buf, sizeof buf, "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
        out += buf;
    }
    return out;
}

inline void save_mesh_obj(const TriangleMesh& mesh, const fs::path& path, int digits = 9)
{
    detail::write_file(path, format_obj(mesh, digits));
}

/**
 * Parses Wavefront OBJ geometry: `v` and `f` records (polygons are fanned,
 * `a/b/c` references use the vertex index, negative indices count back
 * from the latest vertex). Other records, comments and blank lines are
 * ignored.
 */
inline TriangleMesh parse_obj(const std::string& text, const std::string& name = "<obj>")
{
    std::vector<Vec3> verts;
    std::vector<Face> faces;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw Error(ErrorCode::ParseError, name + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) {
            continue;
        }
        if (tag == "v") {
            double c[3];
            for (double& x : c) {
                std::string tok;
                if (!(ls >> tok)) {
                    fail("vertex needs 3 coordinates");
                }
                const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), x);
                if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) {
                    fail("bad coordinate '" + tok + "'");
                }
            }
            verts.emplace_back(c[0], c[1], c[2]);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ls >> tok) {
                const std::string head = tok.substr(0, tok.find('/'));
                long long k = 0;
                const auto r = std::from_chars(head.data(), head.data() + head.size(), k);
                if (r.ec != std::errc() || r.ptr != head.data() + head.size()) {
                    fail("bad face index '" + tok + "'");
                }
                if (k == 0) {
                    fail("face index 0 (OBJ indices are 1-based)");
                }
                const long long resolved = k > 0 ? k - 1 : static_cast<long long>(verts.size()) + k;
                if (resolved < 0 || resolved >= static_cast<long long>(verts.size())) {
                    fail("face index " + std::to_string(k) + " out of range");
                }
                idx.push_back(static_cast<int>(resolved));
            }
            if (idx.size() < 3) {
                fail("face needs at least 3 vertices");
            }
            for (std::size_t i = 1; i + 1 < idx.size(); ++i) {
                faces.push_back({idx[0], idx[i], idx[i + 1]});
            }
        }
    }
    return detail::as_parse_error(name, [&] { return TriangleMesh(std::move(verts), std::move(faces)); });
}

inline TriangleMesh load_mesh_obj(const fs::path& path) { return parse_obj(detail::read_file(path), path.string()); }

// --------------------------------------------------------------- body ----

inline const std::vector<std::string>& body_sections()
{
    static const std::vector<std::string> s = {"schema_version", "mesh",      "skeleton",  "part_labels",
                                               "part_names",     "limb_table", "limb_parts"};
    return s;
}

inline json body_to_json(const BodyModel& model, const std::string& obj_sidecar = {})
{
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["kind"] = "residuum.body";
    if (obj_sidecar.empty()) {
        json verts = json::array();
        for (const Vec3& v : model.body.mesh().vertices()) {
            verts.push_back(detail::vec3_json(v));
        }
        json faces = json::array();
        for (const Face& f : model.body.mesh().faces()) {
            faces.push_back(json::array({f[0], f[1], f[2]}));
        }
        doc["mesh"] = {{"vertices", std::move(verts)}, {"faces", std::move(faces)}};
    } else {
        doc["mesh"] = {{"obj", obj_sidecar}};
    }
    json joints = json::array();
    for (const Vec3& j : model.body.skeleton().joints()) {
        joints.push_back(detail::vec3_json(j));
    }
    doc["skeleton"] = {{"joints", std::move(joints)},
                       {"parents", model.body.skeleton().parents()},
                       {"body25_slot", model.body25_slot}};
    doc["part_labels"] = model.body.part_labels();
    json names = json::object();
    for (const auto& [id, name] : model.body.part_names()) {
        names[std::to_string(id)] = name;
    }
    doc["part_names"] = std::move(names);
    json table = json::object();
    for (const auto& [limb, lj] : model.limb_table) {
        table[std::string(to_string(limb))] = {
            {"anchor", lj.anchor_joint}, {"target", lj.target_joint}, {"residual_slot", lj.residual_slot}};
    }
    doc["limb_table"] = std::move(table);
    json parts = json::object();
    for (const auto& [limb, lp] : model.limb_parts) {
        parts[std::string(to_string(limb))] = {{"kept", lp.kept}, {"distal", lp.distal}};
    }
    doc["limb_parts"] = std::move(parts);
    return doc;
}

/// Writes the body file; with `sidecar_obj` the geometry goes to
/// `<stem>.obj` next to it, printed with 17 significant digits so the
/// body round-trips exactly.
inline void save_body(const BodyModel& model, const fs::path& path, bool sidecar_obj = false)
{
    std::string sidecar;
    if (sidecar_obj) {
        fs::path obj = path;
        obj.replace_extension(".obj");
        sidecar = obj.filename().string();
        save_mesh_obj(model.body.mesh(), obj, 17);
    }
    detail::write_file(path, detail::dump(body_to_json(model, sidecar)));
}

inline BodyModel body_from_json(const json& doc, const std::string& file, const fs::path& base_dir = {})
{
    const detail::Reader r(doc, file);
    r.check_header("residuum.body");
    for (const std::string& s : body_sections()) {
        r.at(doc, s, "");
    }

    const json& mesh = r.at(doc, "mesh", "");
    TriangleMesh tri;
    if (mesh.contains("obj")) {
        const std::string rel = r.get<std::string>(mesh["obj"], "mesh.obj");
        tri = load_mesh_obj(base_dir / rel);
    } else {
        const json& jv = r.array(r.at(mesh, "vertices", "mesh"), "mesh.vertices");
        const json& jf = r.array(r.at(mesh, "faces", "mesh"), "mesh.faces");
        std::vector<Vec3> verts;
        verts.reserve(jv.size());
        for (std::size_t i = 0; i < jv.size(); ++i) {
            verts.push_back(r.vec3(jv[i], "mesh.vertices[" + std::to_string(i) + "]"));
        }
        std::vector<Face> faces;
        faces.reserve(jf.size());
        for (std::size_t i = 0; i < jf.size(); ++i) {
            const std::string where = "mesh.faces[" + std::to_string(i) + "]";
            r.array(jf[i], where, 3);
            faces.push_back({r.integer(jf[i][0], where), r.integer(jf[i][1], where), r.integer(jf[i][2], where)});
        }
        tri = detail::as_parse_error(file, [&] { return TriangleMesh(std::move(verts), std::move(faces)); });
    }

    const json& sk = r.at(doc, "skeleton", "");
    const json& jj = r.array(r.at(sk, "joints", "skeleton"), "skeleton.joints");
    std::vector<Vec3> joints;
    for (std::size_t i = 0; i < jj.size(); ++i) {
        joints.push_back(r.vec3(jj[i], "skeleton.joints[" + std::to_string(i) + "]"));
    }
    const auto parents = r.get<std::vector<int>>(r.at(sk, "parents", "skeleton"), "skeleton.parents");
    const auto slots = r.get<std::vector<int>>(r.at(sk, "body25_slot", "skeleton"), "skeleton.body25_slot");
    if (parents.size() != joints.size() || slots.size() != joints.size()) {
        r.fail("skeleton", "joints, parents and body25_slot must have equal length");
    }

    const auto labels = r.get<std::vector<int>>(doc["part_labels"], "part_labels");
    if (labels.size() != tri.num_vertices()) {
        r.fail("part_labels", "has " + std::to_string(labels.size()) + " entries but the mesh has " +
                                  std::to_string(tri.num_vertices()) + " vertices (one label per vertex required)");
    }
    std::map<int, std::string> names;
    const json& jn = doc["part_names"];
    if (!jn.is_object()) {
        r.fail("part_names", "expected an object of id -> name");
    }
    for (const auto& [key, value] : jn.items()) {
        int id = 0;
        const auto res = std::from_chars(key.data(), key.data() + key.size(), id);
        if (res.ec != std::errc() || res.ptr != key.data() + key.size()) {
            r.fail("part_names." + key, "key is not an integer part id");
        }
        names[id] = r.get<std::string>(value, "part_names." + key);
    }

    auto limb_key = [&](const std::string& key, const std::string& where) {
        const auto limb = limb_from_string(key);
        if (!limb) {
            r.fail(where + "." + key, "unknown limb name");
        }
        return *limb;
    };
    LimbTable table;
    const json& jt = doc["limb_table"];
    if (!jt.is_object()) {
        r.fail("limb_table", "expected an object keyed by limb name");
    }
    for (const auto& [key, value] : jt.items()) {
        const std::string where = "limb_table." + key;
        table[limb_key(key, "limb_table")] =
            LimbJoints{r.integer(r.at(value, "anchor", where), where + ".anchor"),
                       r.integer(r.at(value, "target", where), where + ".target"),
                       r.integer(r.at(value, "residual_slot", where), where + ".residual_slot")};
    }
    LimbPartTable parts;
    const json& jp = doc["limb_parts"];
    if (!jp.is_object()) {
        r.fail("limb_parts", "expected an object keyed by limb name");
    }
    for (const auto& [key, value] : jp.items()) {
        const std::string where = "limb_parts." + key;
        parts[limb_key(key, "limb_parts")] =
            LimbParts{r.get<std::set<int>>(r.at(value, "kept", where), where + ".kept"),
                      r.get<std::set<int>>(r.at(value, "distal", where), where + ".distal")};
    }

    return detail::as_parse_error(file, [&] {
        BodyModel model;
        model.body = ArticulatedBody(std::move(tri), KinematicTree(std::move(joints), parents), labels, names);
        model.limb_table = std::move(table);
        model.limb_parts = std::move(parts);
        model.body25_slot = slots;
        model.validate();
        return model;
    });
}

inline BodyModel load_body(const fs::path& path)
{
    const std::string text = detail::read_file(path);
    const json doc = detail::parse_document(text, path, body_sections());
    return body_from_json(doc, path.string(), path.parent_path());
}

// ---------------------------------------------------------- keypoints ----

inline json keypoints_to_json(const KeypointSet2D& kps)
{
    auto rows = [](const auto& arr) {
        json out = json::array();
        for (const Keypoint2D& k : arr) {
            out.push_back(json::array({k.position.x(), k.position.y(), k.confidence}));
        }
        return out;
    };
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["kind"] = "residuum.keypoints";
    doc["body"] = rows(kps.intact);
    doc["residual"] = rows(kps.residual);
    return doc;
}

inline KeypointSet2D keypoints_from_json(const json& doc, const std::string& file)
{
    const detail::Reader r(doc, file);
    r.check_header("residuum.keypoints");
    KeypointSet2D out;
    auto read = [&](const std::string& key, auto& dest) {
        const json& arr = r.array(r.at(doc, key, ""), key);
        if (arr.size() != dest.size()) {
            throw Error(ErrorCode::WrongSlotCount, file + ": '" + key + "' has " + std::to_string(arr.size()) +
                                                       " entries, expected " + std::to_string(dest.size()));
        }
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string where = key + "[" + std::to_string(i) + "]";
            r.array(arr[i], where, 3);
            const double c = r.number(arr[i][2], where + "[2]");
            if (!(c >= 0.0 && c <= 1.0)) {
                r.fail(where, "confidence " + std::to_string(c) + " outside [0, 1]");
            }
            dest[i] = detail::as_parse_error(file, [&] {
                return Keypoint2D(Vec2(r.number(arr[i][0], where + "[0]"), r.number(arr[i][1], where + "[1]")), c);
            });
        }
    };
    read("body", out.intact);
    read("residual", out.residual);
    return out;
}

inline void save_keypoints(const KeypointSet2D& kps, const fs::path& path)
{
    detail::write_file(path, detail::dump(keypoints_to_json(kps)));
}

inline KeypointSet2D load_keypoints(const fs::path& path)
{
    const std::string text = detail::read_file(path);
    return keypoints_from_json(detail::parse_document(text, path, {"schema_version", "body", "residual"}),
                               path.string());
}

// ------------------------------------------------------------- camera ----

inline json camera_to_json(const PinholeCamera& cam)
{
    json rot = json::array();
    for (int i = 0; i < 3; ++i) {
        rot.push_back(json::array({cam.rotation()(i, 0), cam.rotation()(i, 1), cam.rotation()(i, 2)}));
    }
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["kind"] = "residuum.camera";
    doc["fx"] = cam.fx();
    doc["fy"] = cam.fy();
    doc["cx"] = cam.cx();
    doc["cy"] = cam.cy();
    doc["rotation"] = std::move(rot);
    doc["translation"] = detail::vec3_json(cam.translation());
    doc["width"] = cam.image_width();
    doc["height"] = cam.image_height();
    return doc;
}

inline PinholeCamera camera_from_json(const json& doc, const std::string& file)
{
    const detail::Reader r(doc, file);
    r.check_header("residuum.camera");
    const json& jr = r.array(r.at(doc, "rotation", ""), "rotation", 3);
    Mat3 rot;
    for (int i = 0; i < 3; ++i) {
        rot.row(i) = r.vec3(jr[i], "rotation[" + std::to_string(i) + "]").transpose();
    }
    const Vec3 t = r.vec3(r.at(doc, "translation", ""), "translation");
    const double fx = r.number(r.at(doc, "fx", ""), "fx");
    const double fy = r.number(r.at(doc, "fy", ""), "fy");
    const double cx = r.number(r.at(doc, "cx", ""), "cx");
    const double cy = r.number(r.at(doc, "cy", ""), "cy");
    const int w = r.integer(r.at(doc, "width", ""), "width");
    const int h = r.integer(r.at(doc, "height", ""), "height");
    return detail::as_parse_error(file, [&] { return PinholeCamera(fx, fy, cx, cy, rot, t, w, h); });
}

inline void save_camera(const PinholeCamera& cam, const fs::path& path)
{
    detail::write_file(path, detail::dump(camera_to_json(cam)));
}

inline PinholeCamera load_camera(const fs::path& path)
{
    const std::string text = detail::read_file(path);
    return camera_from_json(
        detail::parse_document(text, path, {"schema_version", "fx", "fy", "cx", "cy", "rotation", "translation"}),
        path.string());
}

// --------------------------------------------------------------- mask ----

/// Binary PGM (P5, maxval 255), 0 / 255 only.
inline std::string format_pgm(const BinaryMask& mask)
{
    std::string out = "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
    const std::size_t header = out.size();
    out.resize(header + mask.bits().size());
    for (std::size_t i = 0; i < mask.bits().size(); ++i) {
        out[header + i] = static_cast<char>(mask.bits()[i] ? 255 : 0);
    }
    return out;
}

/**
 * Reads an 8-bit single-channel PGM (binary P5 or plain P2). A pixel is set
 * when its stored value exceeds 127.
 */
inline BinaryMask parse_pgm(const std::string& data, const std::string& name = "<pgm>")
{
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < data.size()) {
            if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') {
                    ++pos;
                }
            } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&](const char* what) {
        skip_space();
        long long v = 0;
        const auto r = std::from_chars(data.data() + pos, data.data() + data.size(), v);
        if (r.ec == std::errc::result_out_of_range) {
            throw Error(ErrorCode::DimensionOverflow, name + ": " + what + " does not fit");
        }
        if (r.ec != std::errc() || v < 0) {
            throw Error(ErrorCode::ParseError, name + ": bad " + std::string(what) + " in header");
        }
        pos = static_cast<std::size_t>(r.ptr - data.data());
        return v;
    };
    if (data.size() < 2 || data[0] != 'P' || (data[1] != '5' && data[1] != '2')) {
        throw Error(ErrorCode::UnsupportedImageFormat, name + ": expected an 8-bit grayscale PGM (P5 or P2)");
    }
    const bool plain = data[1] == '2';
    pos = 2;
    const long long w = number("width");
    const long long h = number("height");
    const long long maxval = number("maxval");
    if (w <= 0 || h <= 0) {
        throw Error(ErrorCode::ParseError, name + ": image dimensions must be positive");
    }
    if (w > kMaxMaskSide || h > kMaxMaskSide) {
        throw Error(ErrorCode::DimensionOverflow,
                    name + ": " + std::to_string(w) + "x" + std::to_string(h) + " exceeds the supported size");
    }
    if (maxval <= 0 || maxval > 255) {
        throw Error(ErrorCode::UnsupportedImageFormat, name + ": only 8-bit images are supported (maxval " +
                                                           std::to_string(maxval) + ")");
    }
    const auto n = static_cast<std::size_t>(w * h);
    std::vector<std::uint8_t> bits(n);
    if (plain) {
        for (std::size_t i = 0; i < n; ++i) {
            bits[i] = number("pixel") > 127 ? 1 : 0;
        }
    } else {
        if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos]))) {
            throw Error(ErrorCode::ParseError, name + ": malformed header");
        }
        ++pos; // single whitespace before the raster
        if (data.size() - pos < n) {
            throw Error(ErrorCode::ParseError, name + ": raster truncated (" + std::to_string(data.size() - pos) +
                                                   " of " + std::to_string(n) + " bytes)");
        }
        for (std::size_t i = 0; i < n; ++i) {
            bits[i] = static_cast<unsigned char>(data[pos + i]) > 127 ? 1 : 0;
        }
    }
    return BinaryMask(static_cast<int>(w), static_cast<int>(h), std::move(bits));
}

inline void save_mask(const BinaryMask& mask, const fs::path& path) { detail::write_file(path, format_pgm(mask)); }

inline BinaryMask load_mask(const fs::path& path) { return parse_pgm(detail::read_file(path), path.string()); }

// ------------------------------------------------------ synth inputs ----

/// Synthetic body spec; every field is optional and defaults to SynthBodySpec{}.
inline SynthBodySpec synth_spec_from_json(const json& doc, const std::string& file)
{
    const detail::Reader r(doc, file);
    r.check_header("residuum.synth_spec");
    SynthBodySpec spec;
    auto per_limb = [&](const char* key, std::array<double, kResidualSlots>& dest) {
        if (!doc.contains(key)) {
            return;
        }
        const json& obj = doc[key];
        if (!obj.is_object()) {
            r.fail(key, "expected an object keyed by limb name");
        }
        for (const auto& [name, value] : obj.items()) {
            const auto limb = limb_from_string(name);
            if (!limb) {
                r.fail(std::string(key) + "." + name, "unknown limb name");
            }
            dest[static_cast<std::size_t>(*limb)] = r.number(value, std::string(key) + "." + name);
        }
    };
    per_limb("segment_lengths", spec.segment_lengths);
    per_limb("segment_radii", spec.segment_radii);
    auto scalar = [&](const char* key, double& dest) {
        if (doc.contains(key)) {
            dest = r.number(doc[key], key);
        }
    };
    scalar("hand_length", spec.hand_length);
    scalar("hand_radius", spec.hand_radius);
    scalar("foot_length", spec.foot_length);
    scalar("foot_radius", spec.foot_radius);
    scalar("head_radius", spec.head_radius);
    scalar("pose_jitter", spec.pose_jitter);
    if (doc.contains("ring_resolution")) {
        spec.ring_resolution = r.integer(doc["ring_resolution"], "ring_resolution");
    }
    if (doc.contains("axial_resolution")) {
        spec.axial_resolution = r.integer(doc["axial_resolution"], "axial_resolution");
    }
    if (doc.contains("pose_angles")) {
        const json& obj = doc["pose_angles"];
        if (!obj.is_object()) {
            r.fail("pose_angles", "expected an object keyed by limb name");
        }
        for (const auto& [name, value] : obj.items()) {
            const auto limb = limb_from_string(name);
            const std::string where = "pose_angles." + name;
            if (!limb) {
                r.fail(where, "unknown limb name");
            }
            r.array(value, where, 2);
            spec.pose_angles[static_cast<std::size_t>(*limb)] =
                SegmentAngles{r.number(value[0], where + "[0]"), r.number(value[1], where + "[1]")};
        }
    }
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_integer() || (!doc["seed"].is_number_unsigned() && doc["seed"].get<std::int64_t>() < 0)) {
            r.fail("seed", "expected a non-negative integer");
        }
        spec.seed = doc["seed"].get<std::uint64_t>();
    }
    detail::as_parse_error(file, [&] {
        spec.validate();
        return 0;
    });
    return spec;
}

inline SynthBodySpec load_synth_spec(const fs::path& path)
{
    const std::string text = detail::read_file(path);
    return synth_spec_from_json(detail::parse_document(text, path, {"schema_version"}), path.string());
}

/// {"schema_version": 1, "amputations": {"LeftShank": 0.4, ...}}
inline std::map<LimbId, double> amputations_from_json(const json& doc, const std::string& file)
{
    const detail::Reader r(doc, file);
    r.check_header("residuum.amputations");
    const json& obj = r.at(doc, "amputations", "");
    if (!obj.is_object()) {
        r.fail("amputations", "expected an object of limb name -> lambda");
    }
    std::map<LimbId, double> out;
    for (const auto& [name, value] : obj.items()) {
        const auto limb = limb_from_string(name);
        if (!limb) {
            r.fail("amputations." + name, "unknown limb name");
        }
        const double lambda = r.number(value, "amputations." + name);
        if (!(lambda > 0.0 && lambda < 1.0)) {
            r.fail("amputations." + name, "lambda must lie in (0, 1)");
        }
        out[*limb] = lambda;
    }
    return out;
}

inline std::map<LimbId, double> load_amputations(const fs::path& path)
{
    const std::string text = detail::read_file(path);
    return amputations_from_json(detail::parse_document(text, path, {"schema_version", "amputations"}),
                                 path.string());
}

} // namespace residuum::io

#endif // RESIDUUM_IO_HPP_
