"""Data pipeline: resizing, centroids, tiling, synthesis, splits, file I/O."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from centroloc.data.geometry import Polygon, polygon_centroid
from centroloc.data.images import (
    ImageRGB,
    read_image_png,
    resize_bilinear,
    scale_point_set,
    to_tensor,
    write_image_png,
)
from centroloc.data.io import (
    ManifestRecord,
    load_split_items,
    read_manifest,
    read_points_csv,
    read_points_file,
    read_points_geojson,
    read_polygons_geojson,
    write_manifest,
    write_points_csv,
)
from centroloc.data.synth import split_dataset, synth_dataset
from centroloc.data.tiling import merge_tile_predictions, stitch_tiles, tile_mosaic, tile_origins
from centroloc.errors import GenerationError, GeometryError, ParameterError
from centroloc.heatmap import KernelSpec, PointSet, decode, encode
from centroloc.metrics import compute_metrics, match_points
from oracles import cluster_oracle

rng = np.random.default_rng(77)


def random_image(w, h, seed=0):
    return ImageRGB(np.random.default_rng(seed).random((h, w, 3), dtype=np.float32))


class TestImageType:
    def test_validation(self):
        with pytest.raises(ParameterError):
            ImageRGB(np.zeros((4, 4)))
        with pytest.raises(ParameterError):
            ImageRGB(np.full((4, 4, 3), 1.5))

    def test_png_round_trip(self, tmp_path):
        img = random_image(9, 7, seed=3)
        path = tmp_path / "img.png"
        write_image_png(img, path)
        again = read_image_png(path)
        assert np.abs(again.pixels - img.pixels).max() <= 0.5 / 255 + 1e-6

    def test_non_rgb_png_rejected(self, tmp_path):
        from PIL import Image

        path = tmp_path / "gray.png"
        Image.fromarray(np.zeros((4, 4), dtype=np.uint8), mode="L").save(path)
        with pytest.raises(ParameterError):
            read_image_png(path)

    def test_to_tensor_layout(self):
        img = random_image(5, 4)
        t = to_tensor(img)
        assert t.shape == (1, 3, 4, 5)
        assert t.dtype == np.float32
        np.testing.assert_array_equal(t[0, 2], img.pixels[:, :, 2])


class TestResize:
    def test_identity_is_bit_exact(self):
        img = random_image(13, 9, seed=1)
        out = resize_bilinear(img, 13, 9)
        assert np.array_equal(out.pixels, img.pixels)

    def test_constant_stays_constant(self):
        img = ImageRGB(np.full((10, 6, 3), 0.1, dtype=np.float32))
        out = resize_bilinear(img, 17, 23)
        assert np.all(out.pixels == np.float32(0.1))

    def test_1d_ramp_values(self):
        # row [0, 1] widened to 4 columns: centers at src x = -.25, .25, .75, 1.25
        pixels = np.zeros((1, 2, 3))
        pixels[0, 1, :] = 1.0
        out = resize_bilinear(ImageRGB(pixels), 4, 1)
        np.testing.assert_allclose(out.pixels[0, :, 0], [0.0, 0.25, 0.75, 1.0], atol=1e-12)

    def test_zero_target_rejected(self):
        with pytest.raises(ParameterError):
            resize_bilinear(random_image(4, 4), 0, 4)

    def test_point_scaling(self):
        ps = PointSet(((750.0, 300.0), (1200.0, 1499.0)), 1500, 1500)
        scaled = scale_point_set(ps, 1280, 1280)
        assert scaled.frame_width == 1280
        k = 750.0 / 1500.0
        assert scaled.points[0] == (pytest.approx(1280 * k), pytest.approx(1280 * 0.2))

    def test_scaled_points_stay_in_frame(self):
        ps = PointSet(((1499.999, 0.0),), 1500, 1500)
        scaled = scale_point_set(ps, 1280, 1280)
        assert scaled.points[0][0] < 1280


class TestPolygonCentroid:
    def test_unit_square(self):
        p = Polygon(((0, 0), (1, 0), (1, 1), (0, 1)))
        assert polygon_centroid(p) == (0.5, 0.5)

    def test_triangle(self):
        p = Polygon(((0, 0), (3, 0), (0, 3)))
        cx, cy = polygon_centroid(p)
        assert cx == pytest.approx(1.0) and cy == pytest.approx(1.0)

    def test_l_shape_area_weighted(self):
        p = Polygon(((0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)))
        cx, cy = polygon_centroid(p)
        # three unit squares centered at (.5,.5), (1.5,.5), (.5,1.5): mean 5/6
        assert cx == pytest.approx(5.0 / 6.0, abs=1e-12)
        assert cy == pytest.approx(5.0 / 6.0, abs=1e-12)

    def test_reversal_and_rotation_invariance_exact(self):
        verts = ((0.3, 0.1), (4.2, 0.7), (5.1, 3.3), (2.2, 4.9), (-0.8, 2.6))
        base = polygon_centroid(Polygon(verts))
        assert polygon_centroid(Polygon(tuple(reversed(verts)))) == base
        for k in range(1, len(verts)):
            rotated = verts[k:] + verts[:k]
            assert polygon_centroid(Polygon(rotated)) == base

    def test_degenerate_rejected(self):
        with pytest.raises(GeometryError):
            Polygon(((0, 0), (1, 1), (2, 2)))
        with pytest.raises(GeometryError):
            Polygon(((0, 0), (1, 1)))


class TestTiling:
    def test_exact_fit_single_tile(self):
        grid = tile_mosaic(random_image(1280, 1280), 1280, 0)
        assert len(grid.tiles) == 1
        assert (grid.tiles[0].origin_x, grid.tiles[0].origin_y) == (0, 0)

    def test_exact_tiling_two_tiles(self):
        assert tile_origins(2560, 1280, 0) == [0, 1280]

    def test_flush_shift(self):
        assert tile_origins(2000, 1280, 0) == [0, 720]

    def test_small_mosaic_padded(self):
        grid = tile_mosaic(random_image(100, 80), 128, 0)
        tile = grid.tiles[0]
        assert tile.pad_right == 28 and tile.pad_bottom == 48
        assert tile.image.width == 128
        assert not tile.image.pixels[:, 100:].any()

    def test_overlap_validation(self):
        with pytest.raises(ParameterError):
            tile_mosaic(random_image(64, 64), 32, 32)

    def test_point_assignment_and_translation(self):
        img = random_image(100, 50, seed=2)
        pts = PointSet(((10.0, 10.0), (60.0, 20.0), (45.0, 30.0)), 100, 50)
        grid = tile_mosaic(img, 50, 10, points=pts)
        recovered = set()
        for tile in grid.tiles:
            for x, y in tile.points.points:
                recovered.add((x + tile.origin_x, y + tile.origin_y))
        assert recovered == set(pts.points)
        # the overlap column is covered by two tiles
        counts = sum(
            1 for tile in grid.tiles
            if any((x + tile.origin_x, y + tile.origin_y) == (45.0, 30.0)
                   for x, y in tile.points.points)
        )
        assert counts == 2

    @given(
        st.integers(20, 90), st.integers(20, 90),
        st.integers(16, 48), st.integers(0, 10), st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=30)
    def test_reconstruction_exact(self, w, h, tile_size, overlap, seed):
        if overlap >= tile_size:
            overlap = tile_size - 1
        img = random_image(w, h, seed=seed)
        grid = tile_mosaic(img, tile_size, overlap)
        again = stitch_tiles(grid)
        assert np.array_equal(again.pixels, img.pixels)


class TestMergePredictions:
    def test_single_tile_identity(self):
        ps = PointSet(((5.0, 6.0), (30.0, 40.0)), 64, 64)
        merged = merge_tile_predictions([((0, 0), ps)], 2.0, 64, 64)
        assert set(merged.points) == set(ps.points)

    def test_coincident_duplicates_collapse(self):
        a = PointSet(((10.0, 10.0),), 64, 64)
        b = PointSet(((5.0, 10.0),), 64, 64)
        merged = merge_tile_predictions([((0, 0), a), ((5, 0), b)], 2.0, 64, 64)
        assert merged.points == ((10.0, 10.0),)

    def test_highest_score_survives(self):
        a = PointSet(((10.0, 10.0),), 64, 64)
        b = PointSet(((11.0, 10.0),), 64, 64)
        merged = merge_tile_predictions(
            [((0, 0), a), ((0, 0), b)], 3.0, 64, 64,
            scores=[np.array([0.7]), np.array([0.9])],
        )
        assert merged.points == ((11.0, 10.0),)

    def test_zero_radius_merges_only_identical(self):
        pts = PointSet(((10.0, 10.0), (10.5, 10.0)), 64, 64)
        merged = merge_tile_predictions([((0, 0), pts)], 0.0, 64, 64)
        assert len(merged) == 2

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_matches_exhaustive_clustering_oracle(self, seed):
        r = np.random.default_rng(seed)
        n = int(r.integers(1, 20))
        entries = []
        for i in range(n):
            entries.append((float(r.uniform(0, 40)), float(r.uniform(0, 40)),
                            float(r.uniform(0, 1)), i))
        radius = float(r.uniform(0.5, 10.0))
        pts = PointSet(tuple((x, y) for x, y, _, _ in entries), 64, 64) \
            if len({(e[0], e[1]) for e in entries}) == n else None
        if pts is None:
            return
        merged = merge_tile_predictions(
            [((0, 0), pts)], radius, 64, 64,
            scores=[np.array([e[2] for e in entries])],
        )
        assert set(merged.points) == cluster_oracle(entries, radius)


class TestSynth:
    def test_determinism(self):
        a = synth_dataset(9, 3, 64, 64, (2, 4), (3.0, 5.0), 12.0)
        b = synth_dataset(9, 3, 64, 64, (2, 4), (3.0, 5.0), 12.0)
        for (ia, pa), (ib, pb) in zip(a, b):
            assert np.array_equal(ia.pixels, ib.pixels)
            assert pa == pb

    def test_blob_count_contract(self):
        items = synth_dataset(1, 5, 64, 64, (3, 3), (3.0, 5.0), 12.0)
        assert all(len(pts) == 3 for _, pts in items)

    def test_min_separation_holds_across_many_images(self):
        items = synth_dataset(5, 1000, 32, 32, (1, 3), (2.0, 3.0), 8.0)
        for _, pts in items:
            arr = pts.as_array()
            for i in range(len(arr)):
                for j in range(i + 1, len(arr)):
                    assert np.hypot(*(arr[i] - arr[j])) >= 8.0

    def test_separation_precondition(self):
        with pytest.raises(ParameterError, match="min_separation"):
            synth_dataset(0, 1, 64, 64, (2, 3), (4.0, 8.0), 10.0)

    def test_infeasible_packing_raises(self):
        with pytest.raises(GenerationError, match="min_separation"):
            synth_dataset(0, 1, 40, 40, (8, 8), (4.0, 5.0), 16.0)

    def test_labels_roundtrip_through_codec(self):
        items = synth_dataset(7, 4, 128, 128, (3, 6), (4.0, 8.0), 24.0)
        spec = KernelSpec(sigma=5.0)
        for _, pts in items:
            decoded = decode(encode(pts, spec), 0.5, 5)
            metrics = compute_metrics(match_points(decoded, pts, 1.0))
            assert metrics.f1 == 1.0

    def test_zero_images(self):
        assert synth_dataset(0, 0, 32, 32, (1, 2), (2.0, 3.0), 8.0) == []


class TestSplit:
    def test_all_train(self):
        train, val, test = split_dataset(list(range(10)), (1.0, 0.0, 0.0), 0)
        assert len(train) == 10 and not val and not test

    def test_published_proportions(self):
        items = list(range(247))
        train, val, test = split_dataset(items, (159 / 247, 58 / 247, 30 / 247), 3)
        assert (len(train), len(val), len(test)) == (159, 58, 30)

    def test_determinism_and_seed_sensitivity(self):
        items = list(range(50))
        a = split_dataset(items, (0.6, 0.2, 0.2), 1)
        b = split_dataset(items, (0.6, 0.2, 0.2), 1)
        c = split_dataset(items, (0.6, 0.2, 0.2), 2)
        assert a == b
        assert tuple(map(len, c)) == tuple(map(len, a))
        assert a != c

    @given(st.integers(1, 60), st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_union_and_disjointness(self, n, seed):
        items = list(range(n))
        train, val, test = split_dataset(items, (0.5, 0.25, 0.25), seed)
        combined = train + val + test
        assert sorted(combined) == items
        assert len(set(combined)) == n

    def test_explicit_assignments(self):
        items = ["a", "b", "c"]
        train, val, test = split_dataset(items, (0, 0, 0), 0,
                                         assignments=["test", "train", "val"])
        assert train == ["b"] and val == ["c"] and test == ["a"]

    def test_bad_fractions(self):
        with pytest.raises(ParameterError):
            split_dataset([1, 2], (0.5, 0.2, 0.2), 0)


class TestPointsIO:
    def test_csv_round_trip(self, tmp_path):
        ps = PointSet(((1.25, 2.5), (3.0, 4.75)), 10, 10)
        path = tmp_path / "pts.csv"
        write_points_csv(ps, path)
        assert path.read_text().startswith("x,y\n")
        assert read_points_csv(path, 10, 10) == ps

    def test_empty_and_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        assert len(read_points_csv(path, 8, 8)) == 0
        path.write_text("x,y\n")
        assert len(read_points_csv(path, 8, 8)) == 0

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n1.0,2.0\noops\n")
        with pytest.raises(ParameterError, match="line 3"):
            read_points_csv(path, 10, 10)

    def test_bad_header_names_line_one(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("lon,lat\n1,2\n")
        with pytest.raises(ParameterError, match="line 1"):
            read_points_csv(path, 10, 10)

    def test_geojson_points(self, tmp_path):
        doc = {
            "type": "FeatureCollection",
            "features": [
                {"type": "Feature", "properties": {},
                 "geometry": {"type": "Point", "coordinates": [3.5, 4.5]}},
                {"type": "Feature", "properties": {},
                 "geometry": {"type": "Point", "coordinates": [1.0, 2.0]}},
            ],
        }
        path = tmp_path / "pts.geojson"
        path.write_text(json.dumps(doc))
        ps = read_points_geojson(path, 10, 10)
        assert ps.points == ((3.5, 4.5), (1.0, 2.0))
        assert read_points_file(path, 10, 10) == ps

    def test_geojson_polygons(self, tmp_path):
        doc = {
            "type": "FeatureCollection",
            "features": [
                {"type": "Feature", "properties": {},
                 "geometry": {"type": "Polygon",
                              "coordinates": [[[0, 0], [4, 0], [4, 2], [0, 2], [0, 0]]]}},
            ],
        }
        path = tmp_path / "polys.geojson"
        path.write_text(json.dumps(doc))
        polys = read_polygons_geojson(path)
        assert len(polys) == 1
        assert polygon_centroid(polys[0]) == (2.0, 1.0)

    def test_unsupported_extension(self, tmp_path):
        path = tmp_path / "pts.txt"
        path.write_text("x,y\n")
        with pytest.raises(ParameterError):
            read_points_file(path, 4, 4)


class TestManifest:
    def test_round_trip_and_loading(self, tmp_path):
        items = synth_dataset(3, 4, 32, 32, (1, 2), (2.0, 3.0), 8.0)
        (tmp_path / "images").mkdir()
        (tmp_path / "labels").mkdir()
        records = []
        splits = ["train", "train", "val", "test"]
        for i, (img, pts) in enumerate(items):
            write_image_png(img, tmp_path / f"images/im{i}.png")
            write_points_csv(pts, tmp_path / f"labels/im{i}.csv")
            records.append(ManifestRecord(f"images/im{i}.png", f"labels/im{i}.csv", splits[i]))
        manifest = tmp_path / "manifest.json"
        write_manifest(records, manifest)
        assert read_manifest(manifest) == records
        train_items = load_split_items(manifest, "train")
        assert len(train_items) == 2
        assert train_items[0][1] == items[0][1]
        assert np.abs(train_items[0][0].pixels - items[0][0].pixels).max() <= 0.5 / 255 + 1e-6

    def test_bad_split_rejected(self):
        with pytest.raises(ParameterError):
            ManifestRecord("a.png", "a.csv", "holdout")

    def test_bad_record_shape(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps([{"image_path": "a.png"}]))
        with pytest.raises(ParameterError):
            read_manifest(path)
