#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "prt/errors.h"
#include "prt/scene.h"

namespace prt {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& ctx, const std::string& msg) {
    throw ConfigError(ctx + ": " + msg);
}

const json& require(const json& j, const char* key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) fail(ctx, std::string("missing field '") + key + "'");
    return *it;
}

Vec3f parse_vec3(const json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 3) fail(ctx, "expected an array of 3 numbers");
    return Vec3f(j[0].get<float>(), j[1].get<float>(), j[2].get<float>());
}

Vec3f vec3_field(const json& j, const char* key, const std::string& ctx) {
    return parse_vec3(require(j, key, ctx), ctx + "." + key);
}

// Minimal Wavefront OBJ: v / vn / f with v, v//vn or v/vt/vn references.
TriangleMesh load_obj(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open mesh file: " + path);
    std::vector<Vec3f> obj_pos, obj_nrm;
    TriangleMesh m;
    std::map<std::pair<int, int>, uint32_t> dedup;

    auto resolve = [&](int idx, size_t n) -> int {
        if (idx > 0) return idx - 1;
        if (idx < 0) return int(n) + idx;
        throw ConfigError(path + ": OBJ index 0 is invalid");
    };
    auto vertex_for = [&](int pi, int ni) {
        const auto key = std::make_pair(pi, ni);
        auto it = dedup.find(key);
        if (it != dedup.end()) return it->second;
        m.positions.push_back(obj_pos.at(pi));
        if (ni >= 0) m.normals.push_back(obj_nrm.at(ni));
        const uint32_t id = uint32_t(m.positions.size() - 1);
        dedup.emplace(key, id);
        return id;
    };

    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag.empty() || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3f p;
            ls >> p.x >> p.y >> p.z;
            obj_pos.push_back(p);
        } else if (tag == "vn") {
            Vec3f n;
            ls >> n.x >> n.y >> n.z;
            obj_nrm.push_back(n);
        } else if (tag == "f") {
            std::vector<uint32_t> face;
            std::string corner;
            while (ls >> corner) {
                int pi = 0, ni = 0;
                bool has_n = false;
                const size_t s1 = corner.find('/');
                if (s1 == std::string::npos) {
                    pi = std::stoi(corner);
                } else {
                    pi = std::stoi(corner.substr(0, s1));
                    const size_t s2 = corner.find('/', s1 + 1);
                    if (s2 != std::string::npos && s2 + 1 < corner.size()) {
                        ni = std::stoi(corner.substr(s2 + 1));
                        has_n = true;
                    }
                }
                face.push_back(vertex_for(
                    resolve(pi, obj_pos.size()),
                    has_n ? resolve(ni, obj_nrm.size()) : -1));
            }
            if (face.size() < 3) throw ConfigError(path + ": face with < 3 vertices");
            for (size_t i = 1; i + 1 < face.size(); ++i)
                m.indices.insert(m.indices.end(), {face[0], face[i], face[i + 1]});
        }
    }
    if (m.normals.size() != m.positions.size()) m.normals.clear();
    return m;
}

TriangleMesh parse_mesh(const json& j, const std::filesystem::path& base,
                        const std::string& ctx) {
    const std::string shape = require(j, "shape", ctx).get<std::string>();
    const int subdiv = j.value("subdivisions", 1);
    if (shape == "quad") {
        return make_quad(vec3_field(j, "corner", ctx), vec3_field(j, "edge_u", ctx),
                         vec3_field(j, "edge_v", ctx), subdiv);
    }
    if (shape == "sphere") {
        const float r = require(j, "radius", ctx).get<float>();
        if (r <= 0.0f) fail(ctx, "radius must be positive");
        TriangleMesh m = make_sphere(vec3_field(j, "center", ctx), r,
                                     j.value("subdivisions", 2));
        if (j.value("inward_normals", false)) {
            for (size_t i = 0; i + 2 < m.indices.size(); i += 3)
                std::swap(m.indices[i + 1], m.indices[i + 2]);
            for (Vec3f& n : m.normals) n = -n;
        }
        return m;
    }
    if (shape == "box") {
        return make_box(vec3_field(j, "center", ctx),
                        vec3_field(j, "half_extents", ctx), subdiv,
                        j.value("inward_normals", false));
    }
    if (shape == "triangles") {
        TriangleMesh m;
        const json& pos = require(j, "positions", ctx);
        const json& idx = require(j, "indices", ctx);
        if (pos.size() % 3 != 0) fail(ctx, "positions length not a multiple of 3");
        if (idx.size() % 3 != 0) fail(ctx, "indices length not a multiple of 3");
        for (size_t i = 0; i < pos.size(); i += 3)
            m.positions.emplace_back(pos[i].get<float>(), pos[i + 1].get<float>(),
                                     pos[i + 2].get<float>());
        for (const auto& v : idx) m.indices.push_back(v.get<uint32_t>());
        if (j.contains("normals")) {
            const json& nrm = j["normals"];
            if (nrm.size() != pos.size())
                fail(ctx, "normals length differs from positions");
            for (size_t i = 0; i < nrm.size(); i += 3)
                m.normals.emplace_back(nrm[i].get<float>(), nrm[i + 1].get<float>(),
                                       nrm[i + 2].get<float>());
        }
        return m;
    }
    if (shape == "obj") {
        const std::string rel = require(j, "path", ctx).get<std::string>();
        return load_obj((base / rel).string());
    }
    fail(ctx, "unknown shape '" + shape + "'");
}

}  // namespace

Scene load_scene(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open scene file: " + path);
    json root;
    try {
        root = json::parse(f, nullptr, true, true);  // allow comments
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    const std::filesystem::path base = std::filesystem::path(path).parent_path();

    try {
        if (root.value("format_version", 0) != 1)
            fail(path, "format_version must be 1");

        Scene scene;
        scene.source_path = path;

        std::map<std::string, int> material_index;
        for (const json& jm : require(root, "materials", path)) {
            const std::string ctx = path + ": materials[" +
                                    std::to_string(scene.materials.size()) + "]";
            Material mat;
            mat.name = require(jm, "name", ctx).get<std::string>();
            const std::string kind = jm.value("kind", "lambertian");
            if (kind == "lambertian") {
                mat.kind = MaterialKind::lambertian;
            } else if (kind == "glossy") {
                mat.kind = MaterialKind::glossy;
                mat.glossy_exponent = require(jm, "glossy_exponent", ctx).get<float>();
            } else if (kind == "mirror") {
                mat.kind = MaterialKind::mirror;
                mat.albedo = Vec3f(1.0f);
            } else {
                fail(ctx, "unknown material kind '" + kind + "'");
            }
            if (jm.contains("albedo")) mat.albedo = vec3_field(jm, "albedo", ctx);
            if (material_index.count(mat.name))
                fail(ctx, "duplicate material name '" + mat.name + "'");
            material_index[mat.name] = int(scene.materials.size());
            scene.materials.push_back(mat);
        }

        std::map<std::string, int> mesh_index;
        for (const json& jm : require(root, "meshes", path)) {
            const std::string ctx =
                path + ": meshes[" + std::to_string(scene.meshes.size()) + "]";
            TriangleMesh m = parse_mesh(jm, base, ctx);
            m.name = jm.value("name", "mesh" + std::to_string(scene.meshes.size()));
            const std::string mat_name = require(jm, "material", ctx).get<std::string>();
            auto it = material_index.find(mat_name);
            if (it == material_index.end())
                fail(ctx, "reference to undefined material '" + mat_name + "'");
            m.material_id = it->second;
            m.object_id = jm.value("object_id", int(scene.meshes.size()));
            if (mesh_index.count(m.name)) fail(ctx, "duplicate mesh name '" + m.name + "'");
            mesh_index[m.name] = int(scene.meshes.size());
            scene.meshes.push_back(std::move(m));
        }

        if (root.contains("lights")) {
            for (const json& jl : root["lights"]) {
                const std::string ctx =
                    path + ": lights[" + std::to_string(scene.lights.size()) + "]";
                LightSource light;
                const std::string kind = require(jl, "kind", ctx).get<std::string>();
                if (kind == "area") {
                    light.kind = LightKind::area;
                    const std::string mesh_name = require(jl, "mesh", ctx).get<std::string>();
                    auto it = mesh_index.find(mesh_name);
                    if (it == mesh_index.end())
                        fail(ctx, "reference to undefined mesh '" + mesh_name + "'");
                    light.mesh_id = it->second;
                    light.radiance = vec3_field(jl, "radiance", ctx);
                } else if (kind == "point") {
                    light.kind = LightKind::point;
                    light.position = vec3_field(jl, "position", ctx);
                    light.intensity = vec3_field(jl, "intensity", ctx);
                } else if (kind == "environment") {
                    light.kind = LightKind::environment;
                    if (jl.contains("radiance"))
                        light.radiance = vec3_field(jl, "radiance", ctx);
                    if (jl.contains("map")) {
                        light.env_map_path =
                            (base / jl["map"].get<std::string>()).string();
                        scene.env_map = read_pfm(light.env_map_path);
                    }
                } else {
                    fail(ctx, "unknown light kind '" + kind + "'");
                }
                scene.lights.push_back(light);
            }
        }

        if (root.contains("camera")) {
            const json& jc = root["camera"];
            const std::string ctx = path + ": camera";
            scene.camera.position = vec3_field(jc, "position", ctx);
            scene.camera.look_at = vec3_field(jc, "look_at", ctx);
            if (jc.contains("up")) scene.camera.up = vec3_field(jc, "up", ctx);
            scene.camera.vfov_deg = jc.value("vfov_deg", 45.0f);
            if (jc.contains("resolution")) {
                scene.camera.width = jc["resolution"][0].get<int>();
                scene.camera.height = jc["resolution"][1].get<int>();
            }
            if (scene.camera.width <= 0 || scene.camera.height <= 0 ||
                scene.camera.vfov_deg <= 0.0f || scene.camera.vfov_deg >= 180.0f)
                fail(ctx, "invalid camera parameters");
        }

        if (root.contains("probe_bounds")) {
            const std::string ctx = path + ": probe_bounds";
            scene.probe_bounds.lo = vec3_field(root["probe_bounds"], "min", ctx);
            scene.probe_bounds.hi = vec3_field(root["probe_bounds"], "max", ctx);
        }

        scene.finalize();
        return scene;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace prt
