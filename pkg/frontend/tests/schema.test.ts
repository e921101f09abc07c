import assert from "node:assert/strict";
import * as fs from "node:fs";
import * as path from "node:path";
import { test } from "node:test";
import {
  loadAssetIndex,
  parseDescriptor,
  serializeDescriptor,
  validateDescriptor,
} from "../src/schema";

const FIXTURES = path.join(__dirname, "..", "..", "fixtures");

function sceneFixtures(): string[] {
  const dir = path.join(FIXTURES, "scenes3d", "scenes");
  return fs.readdirSync(dir).filter((f) => f.endsWith(".json")).sort()
    .map((f) => path.join(dir, f));
}

test("round-trips generator scene files byte-exactly", () => {
  const files = sceneFixtures();
  assert.ok(files.length >= 5, "expected generated scene fixtures");
  for (const file of files) {
    const text = fs.readFileSync(file, "utf-8");
    const desc = parseDescriptor(text);
    assert.equal(serializeDescriptor(desc), text, path.basename(file));
  }
});

test("round-trip is a fixed point of parse", () => {
  for (const file of sceneFixtures()) {
    const text = fs.readFileSync(file, "utf-8");
    const again = serializeDescriptor(parseDescriptor(serializeDescriptor(parseDescriptor(text))));
    assert.equal(again, text);
  }
});

test("63-bit seeds survive exactly", () => {
  let sawBig = false;
  for (const file of sceneFixtures()) {
    const text = fs.readFileSync(file, "utf-8");
    const desc = parseDescriptor(text);
    const token = /"seed": (\d+)/.exec(text)![1];
    assert.equal(desc.seed.toString(), token);
    if (desc.seed > BigInt(Number.MAX_SAFE_INTEGER)) {
      sawBig = true;
    }
  }
  assert.ok(sawBig, "fixtures should include a seed beyond 2^53");
});

test("fixture scenes validate against the fixture asset index", () => {
  const assets = loadAssetIndex(path.join(FIXTURES, "assets.json"));
  for (const file of sceneFixtures()) {
    const desc = parseDescriptor(fs.readFileSync(file, "utf-8"));
    assert.deepEqual(validateDescriptor(desc, assets), []);
  }
});

test("unknown region and unresolved assets are reported", () => {
  const assets = loadAssetIndex(path.join(FIXTURES, "assets.json"));
  const text = fs.readFileSync(sceneFixtures()[0], "utf-8");

  const withBadRegion = parseDescriptor(text);
  withBadRegion.objects[0].region_materials["99"] = { kind: "asset", asset_id: "mat0" };
  assert.ok(validateDescriptor(withBadRegion, assets).some((f) => f.rule === "region_known"));

  const withBadMesh = parseDescriptor(text);
  withBadMesh.objects[0].mesh = "ghost";
  assert.ok(validateDescriptor(withBadMesh, assets).some((f) => f.rule === "mesh_resolves"));

  const withBadHdri = parseDescriptor(text);
  withBadHdri.hdri.id = "nowhere";
  assert.ok(validateDescriptor(withBadHdri, assets).some((f) => f.rule === "hdri_resolves"));
});

test("far look-at fails the camera bound rule", () => {
  const desc = parseDescriptor(fs.readFileSync(sceneFixtures()[0], "utf-8"));
  desc.camera.look_at = [500, 500, 500];
  assert.ok(validateDescriptor(desc, null).some((f) => f.rule === "camera_targets_scene"));
});

test("empty material table entry is tolerated but schema violations raise", () => {
  assert.throws(() => parseDescriptor("{}"));
  assert.throws(() => parseDescriptor('{"schema_version": "one"}'));
});
