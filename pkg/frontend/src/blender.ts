/**
 * Headless Blender (>= 4.0, Cycles) invocation: turns a scene descriptor into
 * a generated bpy script, runs it in background mode, and post-processes the
 * per-region annotation renders into the standard sample layout.
 */

import { spawnSync } from "child_process";
import * as fs from "fs";
import * as path from "path";
import { AssetIndex, SceneDescriptor } from "./schema";

export interface RenderOptions {
  samples: number;
  resolution: [number, number];
  seed: bigint;
}

export function findBlender(explicit?: string): string | null {
  if (explicit) {
    return fs.existsSync(explicit) ? explicit : null;
  }
  const paths = (process.env.PATH ?? "").split(path.delimiter);
  for (const dir of paths) {
    const candidate = path.join(dir, "blender");
    if (fs.existsSync(candidate)) {
      return candidate;
    }
  }
  return null;
}

function pyStr(s: string): string {
  return JSON.stringify(s);
}

/**
 * The generated script builds the scene inside Blender: imported meshes carry
 * one material per map region mixed by the region-map textures, the HDRI
 * lights the world, and after the RGB render each region is re-rendered with
 * index emission shaders so the annotation planes match the geometry exactly.
 */
export function generateBpyScript(
  desc: SceneDescriptor,
  assets: AssetIndex,
  mapDir: string,
  outDir: string,
  options: RenderOptions,
): string {
  const k = desc.region_map.num_regions;
  const meshPath = (id: string) => pyStr(path.resolve(assets.meshes[id]));
  const lines: string[] = [];
  const emit = (s: string) => lines.push(s);

  emit("import bpy");
  emit("import math");
  emit("import os");
  emit("");
  emit(`OUT_DIR = ${pyStr(path.resolve(outDir))}`);
  emit(`MAP_DIR = ${pyStr(path.resolve(mapDir))}`);
  emit("os.makedirs(OUT_DIR, exist_ok=True)");
  emit("");
  emit("bpy.ops.wm.read_factory_settings(use_empty=True)");
  emit("scene = bpy.context.scene");
  emit("scene.render.engine = 'CYCLES'");
  emit(`scene.cycles.samples = ${options.samples}`);
  emit(`scene.cycles.seed = ${options.seed % 2147483647n}`);
  emit("scene.cycles.use_animated_seed = False");
  emit(`scene.render.resolution_x = ${options.resolution[0]}`);
  emit(`scene.render.resolution_y = ${options.resolution[1]}`);
  emit("scene.render.resolution_percentage = 100");
  emit("scene.render.image_settings.file_format = 'PNG'");
  emit("");
  emit("def look_at(obj, target):");
  emit("    direction = [t - p for t, p in zip(target, obj.location)]");
  emit("    rot = obj.rotation_euler");
  emit("    dx, dy, dz = direction");
  emit("    dist = math.sqrt(dx * dx + dy * dy) or 1e-9");
  emit("    rot[1] = 0.0");
  emit("    rot[0] = math.atan2(dist, -dz)");
  emit("    rot[2] = math.atan2(dy, dx) - math.pi / 2");
  emit("");
  emit("def region_image(idx):");
  emit("    img = bpy.data.images.load(os.path.join(MAP_DIR, 'region_%02d.png' % idx))");
  emit("    img.colorspace_settings.name = 'Non-Color'");
  emit("    return img");
  emit("");
  emit("def material_nodes(mat):");
  emit("    mat.use_nodes = True");
  emit("    tree = mat.node_tree");
  emit("    tree.nodes.clear()");
  emit("    return tree");
  emit("");
  // Per-region shading: start from the background shader and layer each
  // region's PBR (or uniform) shader on top, mixed by its region texture.
  emit("def build_region_material(name, region_specs):");
  emit("    mat = bpy.data.materials.new(name)");
  emit("    tree = material_nodes(mat)");
  emit("    output = tree.nodes.new('ShaderNodeOutputMaterial')");
  emit("    current = None");
  emit("    for idx, spec in enumerate(region_specs):");
  emit("        shader = tree.nodes.new('ShaderNodeBsdfPrincipled')");
  emit("        if spec['kind'] == 'uniform':");
  emit("            shader.inputs['Base Color'].default_value = (*spec['albedo'], 1.0)");
  emit("            shader.inputs['Roughness'].default_value = spec['properties']['roughness']");
  emit("            shader.inputs['Metallic'].default_value = spec['properties']['metallic']");
  emit("            shader.inputs['Transmission Weight'].default_value = spec['properties']['transmission']");
  emit("        else:");
  emit("            tex = tree.nodes.new('ShaderNodeTexImage')");
  emit("            tex.image = bpy.data.images.load(os.path.join(spec['path'], 'albedo.png'))");
  emit("            tree.links.new(tex.outputs['Color'], shader.inputs['Base Color'])");
  emit("            rough_path = os.path.join(spec['path'], 'roughness.png')");
  emit("            if os.path.exists(rough_path):");
  emit("                rough = tree.nodes.new('ShaderNodeTexImage')");
  emit("                rough.image = bpy.data.images.load(rough_path)");
  emit("                rough.image.colorspace_settings.name = 'Non-Color'");
  emit("                tree.links.new(rough.outputs['Color'], shader.inputs['Roughness'])");
  emit("        if current is None:");
  emit("            current = shader");
  emit("            continue");
  emit("        mask = tree.nodes.new('ShaderNodeTexImage')");
  emit("        mask.image = region_image(spec['region'])");
  emit("        mix = tree.nodes.new('ShaderNodeMixShader')");
  emit("        tree.links.new(mask.outputs['Color'], mix.inputs['Fac'])");
  emit("        tree.links.new(current.outputs[0], mix.inputs[1])");
  emit("        tree.links.new(shader.outputs[0], mix.inputs[2])");
  emit("        current = mix");
  emit("    tree.links.new(current.outputs[0], output.inputs['Surface'])");
  emit("    return mat");
  emit("");
  emit("def import_obj(path):");
  emit("    before = set(bpy.data.objects)");
  emit("    bpy.ops.wm.obj_import(filepath=path)");
  emit("    return [o for o in bpy.data.objects if o not in before]");
  emit("");
  emit("primary_objects = []");

  desc.objects.forEach((obj, index) => {
    const specs = Object.keys(obj.region_materials).sort().map((regionKey) => {
      const assign = obj.region_materials[regionKey];
      if (assign.kind === "asset") {
        return `{'kind': 'asset', 'region': ${Number(regionKey)}, ` +
          `'path': ${pyStr(path.resolve(assets.materials[assign.asset_id]))}}`;
      }
      const albedo = `(${assign.albedo.join(", ")})`;
      const props = Object.keys(assign.properties).sort()
        .map((p) => `'${p}': ${assign.properties[p]}`).join(", ");
      return `{'kind': 'uniform', 'region': ${Number(regionKey)}, ` +
        `'albedo': ${albedo}, 'properties': {${props}}}`;
    });
    emit(`for ob in import_obj(${meshPath(obj.mesh)}):`);
    emit(`    ob.location = (${obj.transform.position.join(", ")})`);
    emit(`    ob.rotation_euler = (${obj.transform.rotation_euler.join(", ")})`);
    emit(`    ob.scale = (${obj.transform.scale},) * 3`);
    emit(`    mat = build_region_material('primary_${index}', [${specs.join(", ")}])`);
    emit("    ob.data.materials.clear()");
    emit("    ob.data.materials.append(mat)");
    emit("    primary_objects.append(ob)");
  });

  desc.distractors.forEach((d, index) => {
    const uniform = d.material.kind === "uniform" ? d.material : null;
    const albedo = uniform ? uniform.albedo : [0.5, 0.5, 0.5];
    emit(`for ob in import_obj(${meshPath(d.mesh)}):`);
    emit(`    ob.location = (${d.transform.position.join(", ")})`);
    emit(`    ob.rotation_euler = (${d.transform.rotation_euler.join(", ")})`);
    emit(`    ob.scale = (${d.transform.scale},) * 3`);
    emit(`    mat = bpy.data.materials.new('distractor_${index}')`);
    emit("    mat.use_nodes = True");
    emit("    bsdf = mat.node_tree.nodes['Principled BSDF']");
    emit(`    bsdf.inputs['Base Color'].default_value = (${albedo.join(", ")}, 1.0)`);
    emit("    ob.data.materials.clear()");
    emit("    ob.data.materials.append(mat)");
  });

  if (desc.ground) {
    emit(`for ob in import_obj(${meshPath(desc.ground.mesh)}):`);
    emit(`    ob.scale = (${desc.ground.size},) * 3`);
    emit("    ob.location = (0.0, 0.0, 0.0)");
  }

  emit("");
  emit("world = bpy.data.worlds.new('world')");
  emit("scene.world = world");
  emit("world.use_nodes = True");
  emit("env = world.node_tree.nodes.new('ShaderNodeTexEnvironment')");
  emit(`env.image = bpy.data.images.load(${pyStr(path.resolve(assets.hdris[desc.hdri.id]))})`);
  emit("mapping = world.node_tree.nodes.new('ShaderNodeMapping')");
  emit("coords = world.node_tree.nodes.new('ShaderNodeTexCoord')");
  emit(`mapping.inputs['Rotation'].default_value[2] = ${desc.hdri.rotation}`);
  emit("world.node_tree.links.new(coords.outputs['Generated'], mapping.inputs['Vector'])");
  emit("world.node_tree.links.new(mapping.outputs['Vector'], env.inputs['Vector'])");
  emit("background = world.node_tree.nodes['Background']");
  emit("world.node_tree.links.new(env.outputs['Color'], background.inputs['Color'])");
  emit("");

  desc.lights.forEach((light, index) => {
    emit(`light_data_${index} = bpy.data.lights.new('light_${index}', type='POINT')`);
    emit(`light_data_${index}.energy = ${light.power}`);
    emit(`light_${index} = bpy.data.objects.new('light_${index}', light_data_${index})`);
    emit(`light_${index}.location = (${light.position.join(", ")})`);
    emit(`scene.collection.objects.link(light_${index})`);
  });

  emit("cam_data = bpy.data.cameras.new('camera')");
  emit(`cam_data.lens = ${desc.camera.focal_length_mm}`);
  emit("cam_data.sensor_width = 36.0");
  emit("camera = bpy.data.objects.new('camera', cam_data)");
  emit(`camera.location = (${desc.camera.position.join(", ")})`);
  emit("scene.collection.objects.link(camera)");
  emit(`look_at(camera, (${desc.camera.look_at.join(", ")}))`);
  emit("scene.camera = camera");
  emit("");
  emit("scene.render.image_settings.color_mode = 'RGB'");
  emit("scene.render.image_settings.color_depth = '8'");
  emit("scene.render.filepath = os.path.join(OUT_DIR, 'rgb.png')");
  emit("bpy.ops.render.render(write_still=True)");
  emit("");
  // Annotation passes: flat emission of each region's mask, no bounces.
  emit("scene.cycles.samples = 1");
  emit("scene.render.image_settings.color_mode = 'BW'");
  emit("scene.render.image_settings.color_depth = '16'");
  emit("world.node_tree.nodes['Background'].inputs['Strength'].default_value = 0.0");
  emit("scene.view_settings.view_transform = 'Raw'");
  emit(`for region in range(${k}):`);
  emit("    emission_mat = bpy.data.materials.new('annotation_%d' % region)");
  emit("    tree = material_nodes(emission_mat)");
  emit("    output = tree.nodes.new('ShaderNodeOutputMaterial')");
  emit("    emission = tree.nodes.new('ShaderNodeEmission')");
  emit("    mask = tree.nodes.new('ShaderNodeTexImage')");
  emit("    mask.image = region_image(region)");
  emit("    tree.links.new(mask.outputs['Color'], emission.inputs['Color'])");
  emit("    tree.links.new(emission.outputs[0], output.inputs['Surface'])");
  emit("    for ob in primary_objects:");
  emit("        ob.data.materials.clear()");
  emit("        ob.data.materials.append(emission_mat)");
  emit("    scene.render.filepath = os.path.join(OUT_DIR, 'gt_mat%d.png' % region)");
  emit("    bpy.ops.render.render(write_still=True)");
  emit("");
  return lines.join("\n") + "\n";
}

export interface BlenderRunResult {
  code: number;
  stderr: string;
}

export function runBlender(blenderBin: string, scriptPath: string): BlenderRunResult {
  const result = spawnSync(
    blenderBin,
    ["--background", "--factory-startup", "--python", scriptPath],
    { encoding: "utf-8", timeout: 1000 * 60 * 30 },
  );
  return {
    code: result.status ?? 1,
    stderr: (result.stderr ?? "") + (result.error ? String(result.error) : ""),
  };
}
