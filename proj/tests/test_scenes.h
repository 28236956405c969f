#pragma once

// Scene builders shared across test suites. Axis convention: y is up, the
// box opens toward +z where the camera sits.

#include "prt/scene.h"

namespace prt::testing {

// Five-wall red/green box with a ceiling panel light and (optionally) a
// diffuse and a glossy sphere inside.
inline Scene cornell_box(bool with_spheres = true,
                         Vec3f light_radiance = Vec3f(15.0f),
                         int wall_subdiv = 1) {
    Scene scene;
    scene.materials = {
        Material{"white", MaterialKind::lambertian, Vec3f(0.73f)},
        Material{"red", MaterialKind::lambertian, Vec3f(0.63f, 0.065f, 0.05f)},
        Material{"green", MaterialKind::lambertian, Vec3f(0.14f, 0.45f, 0.091f)},
        Material{"lamp", MaterialKind::lambertian, Vec3f(0.78f)},
        Material{"shiny", MaterialKind::glossy, Vec3f(0.6f, 0.55f, 0.45f), 32.0f},
    };

    auto add = [&scene](TriangleMesh m, int material) {
        m.material_id = material;
        m.object_id = int(scene.meshes.size());
        scene.meshes.push_back(std::move(m));
    };

    add(make_quad({-1, 0, -1}, {0, 0, 2}, {2, 0, 0}, wall_subdiv), 0);   // floor
    add(make_quad({-1, 2, -1}, {2, 0, 0}, {0, 0, 2}, wall_subdiv), 0);   // ceiling
    add(make_quad({-1, 0, -1}, {2, 0, 0}, {0, 2, 0}, wall_subdiv), 0);   // back
    add(make_quad({-1, 0, -1}, {0, 2, 0}, {0, 0, 2}, wall_subdiv), 1);   // left
    add(make_quad({1, 0, -1}, {0, 0, 2}, {0, 2, 0}, wall_subdiv), 2);    // right
    add(make_quad({-0.3f, 1.98f, -0.3f}, {0.6f, 0, 0}, {0, 0, 0.6f}, 1), 3);

    const int light_mesh = int(scene.meshes.size()) - 1;
    if (with_spheres) {
        add(make_sphere({-0.45f, 0.35f, -0.25f}, 0.35f, 2), 0);
        add(make_sphere({0.4f, 0.3f, 0.3f}, 0.3f, 2), 4);
    }

    LightSource lamp;
    lamp.kind = LightKind::area;
    lamp.mesh_id = light_mesh;
    lamp.radiance = light_radiance;
    scene.lights.push_back(lamp);

    scene.camera.position = {0.0f, 1.0f, 3.0f};
    scene.camera.look_at = {0.0f, 1.0f, 0.0f};
    scene.camera.vfov_deg = 45.0f;
    scene.finalize();
    return scene;
}

// Fully closed cube lit by an interior panel; nothing escapes.
inline Scene closed_box(Vec3f wall_albedo = Vec3f(0.73f),
                        Vec3f light_radiance = Vec3f(10.0f)) {
    Scene scene;
    scene.materials = {
        Material{"wall", MaterialKind::lambertian, wall_albedo},
        Material{"lamp", MaterialKind::lambertian, Vec3f(0.0f)},
    };
    TriangleMesh box = make_box({0, 1, 0}, {1, 1, 1}, 1, /*inward_normals=*/true);
    box.material_id = 0;
    box.object_id = 0;
    scene.meshes.push_back(std::move(box));

    TriangleMesh panel = make_quad({-0.3f, 1.95f, -0.3f}, {0.6f, 0, 0},
                                   {0, 0, 0.6f}, 1);
    panel.material_id = 1;
    panel.object_id = 1;
    scene.meshes.push_back(std::move(panel));

    LightSource lamp;
    lamp.kind = LightKind::area;
    lamp.mesh_id = 1;
    lamp.radiance = light_radiance;
    scene.lights.push_back(lamp);

    scene.camera.position = {0.0f, 1.0f, 0.6f};
    scene.camera.look_at = {0.0f, 0.8f, -1.0f};
    scene.camera.vfov_deg = 60.0f;
    scene.finalize();
    return scene;
}

// Closed cube with an interior point light and a small horizontal blocker
// that puts the floor's center in full shadow: that point receives only
// bounced light, while almost every direction from it sees a lit surface.
inline Scene umbra_scene() {
    Scene scene;
    scene.materials = {
        Material{"wall", MaterialKind::lambertian, Vec3f(0.75f)},
        Material{"blocker", MaterialKind::lambertian, Vec3f(0.3f)},
    };
    TriangleMesh box = make_box({0, 1, 0}, {1, 1, 1}, 1, /*inward_normals=*/true);
    box.material_id = 0;
    box.object_id = 0;
    scene.meshes.push_back(std::move(box));

    TriangleMesh blocker =
        make_quad({-0.25f, 1, -0.25f}, {0.5f, 0, 0}, {0, 0, 0.5f}, 1);
    blocker.material_id = 1;
    blocker.object_id = 1;
    scene.meshes.push_back(std::move(blocker));

    LightSource bulb;
    bulb.kind = LightKind::point;
    bulb.position = {0.0f, 1.8f, 0.0f};
    bulb.intensity = {15.0f, 15.0f, 15.0f};
    scene.lights.push_back(bulb);

    // Aim slightly off the floor's center so the target avoids the shared
    // triangle diagonal (an exact edge hit can be rejected by both halves).
    scene.camera.position = {-0.2f, 0.35f, 0.25f};
    scene.camera.look_at = {0.12f, 0.0f, 0.07f};
    scene.finalize();
    return scene;
}

}  // namespace prt::testing
