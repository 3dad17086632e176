"""Command-line surface; a thin client over the HTTP service API.

Exit codes: 0 success, 2 usage error, 3 data/service error.
"""

from __future__ import annotations

import base64
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from .client import ServiceClient, ServiceError
from .config import ToolkitConfig, preset
from .tensorio import DataFormatError

DATA_ERROR_EXIT = 3


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(DATA_ERROR_EXIT)


def _load_config(config_path, dataset) -> ToolkitConfig:
    if config_path:
        return ToolkitConfig.load(config_path)
    return preset(dataset)


def _b64_file(path) -> str:
    return base64.b64encode(Path(path).read_bytes()).decode("ascii")


def _write_b64(path, payload: str) -> None:
    Path(path).write_bytes(base64.b64decode(payload))


def _frame_payload(cloud_path, boxes_path, config: ToolkitConfig, frame_id=None) -> dict:
    from .tensorio import read_boxes_jsonl

    boxes = []
    records = (
        read_boxes_jsonl(boxes_path, config.class_names) if boxes_path else []
    )
    fid = frame_id or next(
        (r["frame_id"] for r in records if r["frame_id"]), Path(cloud_path).stem
    )
    for record in records:
        box = record["box"]
        row = {
            "frame_id": record["frame_id"] or fid,
            "class": config.class_names[box.class_id],
            "cx": box.center[0],
            "cy": box.center[1],
            "cz": box.center[2],
            "w": box.w,
            "l": box.l,
            "h": box.h,
            "yaw": box.yaw,
        }
        if "num_points" in record:
            row["num_points"] = record["num_points"]
        boxes.append(row)
    return {"frame_id": fid, "cloud_b64": _b64_file(cloud_path), "boxes": boxes}


def _write_frame_response(frame: dict, cloud_out, boxes_out):
    _write_b64(cloud_out, frame["cloud_b64"])
    with open(boxes_out, "w") as fh:
        for box in frame["boxes"]:
            row = {k: v for k, v in box.items() if v is not None}
            fh.write(json.dumps(row) + "\n")


def _run_jobs(jobs: int, work, items: list):
    """Apply `work` over items, order-preserving, optionally in a thread pool."""
    if jobs <= 1 or len(items) <= 1:
        return [work(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, items))


def common_options(fn):
    fn = click.option(
        "--config", "config_path", type=click.Path(exists=True), default=None,
        help="JSON config document (overrides --dataset preset).",
    )(fn)
    fn = click.option(
        "--dataset", type=click.Choice(["once", "waymo"]), default="once",
        show_default=True, help="Config preset when no --config is given.",
    )(fn)
    return fn


@click.group()
@click.option("--server", default=None, envvar="BEVKIT_SERVER",
              help="Remote service URL; default runs the service in-process.")
@click.pass_context
def main(ctx, server):
    """Point-cloud detection toolkit: voxelize, corner targets, decode, eval."""
    ctx.obj = {"server": server}


def _client(ctx) -> ServiceClient:
    return ServiceClient(server=ctx.obj.get("server"))


@main.command()
@common_options
@click.option("--cloud", "clouds", type=click.Path(exists=True), multiple=True,
              required=True, help="Point cloud .bin file(s).")
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.pass_context
def voxelize(ctx, config_path, dataset, clouds, out_dir, seed, jobs):
    """Assign clouds to the voxel grid; writes indices/blocks/counts TNS1."""
    config = _load_config(config_path, dataset)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with _client(ctx) as client:

        def work(cloud_path):
            response = client.post(
                "/voxelize",
                {
                    "config": config.to_dict(),
                    "cloud_b64": _b64_file(cloud_path),
                    "seed": seed,
                },
            )
            stem = Path(cloud_path).stem
            _write_b64(out / f"{stem}.indices.tns1", response["indices_b64"])
            _write_b64(out / f"{stem}.blocks.tns1", response["blocks_b64"])
            _write_b64(out / f"{stem}.counts.tns1", response["counts_b64"])
            return response["num_voxels"]

        counts = _run_jobs(jobs, work, list(clouds))
    for cloud_path, n in zip(clouds, counts):
        click.echo(f"{cloud_path}: {n} voxels")


@main.command()
@common_options
@click.option("--cloud", "clouds", type=click.Path(exists=True), multiple=True, required=True)
@click.option("--boxes", "boxes_files", type=click.Path(exists=True), multiple=True, required=True)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="JSON file of per-frame corner selections.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.pass_context
def assign(ctx, config_path, dataset, clouds, boxes_files, out_path, jobs):
    """Run adaptive corner selection for each annotated frame."""
    if len(clouds) != len(boxes_files):
        raise click.UsageError("--cloud and --boxes must be paired")
    config = _load_config(config_path, dataset)
    with _client(ctx) as client:

        def work(pair):
            cloud_path, boxes_path = pair
            frame = _frame_payload(cloud_path, boxes_path, config)
            response = client.post(
                "/corners/assign", {"config": config.to_dict(), "frame": frame}
            )
            return frame["frame_id"], response["selections"]

        results = _run_jobs(jobs, work, list(zip(clouds, boxes_files)))
    Path(out_path).write_text(json.dumps(dict(results), indent=2) + "\n")
    click.echo(f"wrote selections for {len(results)} frame(s) to {out_path}")


@main.command()
@common_options
@click.option("--cloud", "clouds", type=click.Path(exists=True), multiple=True, required=True)
@click.option("--boxes", "boxes_files", type=click.Path(exists=True), multiple=True, required=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--corners", type=click.Choice(["1", "2", "3", "4"]), default=None,
              help="Corner types per box (default from config).")
@click.option("--skip-degenerate", is_flag=True, help="Drop zero-point boxes from corner maps.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.pass_context
def targets(ctx, config_path, dataset, clouds, boxes_files, out_dir, corners,
            skip_degenerate, jobs):
    """Build supervision tensors; writes one TNS1 file per tensor per frame."""
    if len(clouds) != len(boxes_files):
        raise click.UsageError("--cloud and --boxes must be paired")
    config = _load_config(config_path, dataset)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with _client(ctx) as client:

        def work(pair):
            cloud_path, boxes_path = pair
            frame = _frame_payload(cloud_path, boxes_path, config)
            response = client.post(
                "/targets/build",
                {
                    "config": config.to_dict(),
                    "frame": frame,
                    "corners": int(corners) if corners else None,
                    "skip_degenerate": skip_degenerate,
                },
            )
            for name, blob in response["tensors"].items():
                _write_b64(out / f"{frame['frame_id']}.{name}.tns1", blob)
            return frame["frame_id"], response

        results = _run_jobs(jobs, work, list(zip(clouds, boxes_files)))
    for frame_id, response in results:
        click.echo(
            f"{frame_id}: collisions={response['collisions']} "
            f"skipped_corners={response['skipped_corners']} "
            f"skipped_centers={response['skipped_centers']}"
        )


@main.command()
@common_options
@click.option("--cloud", "clouds", type=click.Path(exists=True), multiple=True, required=True)
@click.option("--boxes", "boxes_files", type=click.Path(exists=True), multiple=True, required=True)
@click.option("--out-dir", type=click.Path(), default=None,
              help="Output directory for augmented frames.")
@click.option("--build-db", "build_db_dir", type=click.Path(), default=None,
              help="Build a ground-truth database from the frames instead.")
@click.option("--db", "db_dir", type=click.Path(exists=True), default=None,
              help="Database directory to sample pasted objects from.")
@click.option("--no-global", is_flag=True, help="Skip the global flip/rotate/scale.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.pass_context
def augment(ctx, config_path, dataset, clouds, boxes_files, out_dir, build_db_dir,
            db_dir, no_global, seed, jobs):
    """Augment frames (database sampling + global transform), or build the DB."""
    if len(clouds) != len(boxes_files):
        raise click.UsageError("--cloud and --boxes must be paired")
    config = _load_config(config_path, dataset)

    if build_db_dir:
        from .augment import GtDatabase
        from .service.models import DbEntryModel, tensor_from_b64

        with _client(ctx) as client:
            frames = [
                _frame_payload(c, b, config) for c, b in zip(clouds, boxes_files)
            ]
            response = client.post(
                "/augment/build-db", {"config": config.to_dict(), "frames": frames}
            )
        import numpy as np

        from .augment import DbEntry

        db = GtDatabase(entries={}, attr_dim=config.attr_dim,
                        skipped_empty=response["skipped_empty"])
        for row in response["entries"]:
            model = DbEntryModel(**row)
            entry = DbEntry(
                class_id=model.class_id,
                center=np.array(model.center),
                dims=np.array(model.dims),
                yaw=model.yaw,
                points_local=tensor_from_b64(model.points_b64).astype(np.float64),
                source_frame=model.source_frame,
            )
            db.entries.setdefault(entry.class_id, []).append(entry)
        db.save(build_db_dir)
        click.echo(
            f"database: {sum(db.class_counts().values())} entries "
            f"({db.skipped_empty} empty boxes skipped) -> {build_db_dir}"
        )
        return

    if not out_dir:
        raise click.UsageError("--out-dir is required unless --build-db is used")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    db_entries = None
    if db_dir:
        from .augment import GtDatabase
        from .service.models import b64_tensor

        db = GtDatabase.load(db_dir)
        db_entries = [
            {
                "class_id": e.class_id,
                "center": list(e.center),
                "dims": list(e.dims),
                "yaw": e.yaw,
                "points_b64": b64_tensor(e.points_local),
                "source_frame": e.source_frame,
            }
            for class_id in sorted(db.entries)
            for e in db.entries[class_id]
        ]

    with _client(ctx) as client:

        def work(item):
            index, (cloud_path, boxes_path) = item
            frame = _frame_payload(cloud_path, boxes_path, config)
            response = client.post(
                "/augment",
                {
                    "config": config.to_dict(),
                    "frame": frame,
                    "seed": seed + index,
                    "db_entries": db_entries,
                    "apply_global": not no_global,
                },
            )
            stem = Path(cloud_path).stem
            _write_frame_response(
                response["frame"], out / f"{stem}.bin", out / f"{stem}.jsonl"
            )
            return frame["frame_id"], response["pasted"]

        results = _run_jobs(jobs, work, list(enumerate(zip(clouds, boxes_files))))
    for frame_id, pasted in results:
        click.echo(f"{frame_id}: pasted {pasted} object(s)")


@main.command()
@common_options
@click.option("--heatmap", type=click.Path(exists=True), required=True,
              help="Center heatmap TNS1 (H x W x C).")
@click.option("--regression", type=click.Path(exists=True), required=True,
              help="Center regression TNS1 (H x W x 8).")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--peaks", type=int, default=100, show_default=True)
@click.option("--threshold", type=float, default=0.1, show_default=True)
@click.option("--nms-iou", type=float, default=None)
@click.option("--frame-id", default="frame")
@click.pass_context
def decode(ctx, config_path, dataset, heatmap, regression, out_path, peaks,
           threshold, nms_iou, frame_id):
    """Decode heatmap peaks plus regression into detection JSON lines."""
    config = _load_config(config_path, dataset)
    with _client(ctx) as client:
        response = client.post(
            "/decode",
            {
                "config": config.to_dict(),
                "heatmap_b64": _b64_file(heatmap),
                "regression_b64": _b64_file(regression),
                "max_peaks": peaks,
                "threshold": threshold,
                "nms_iou": nms_iou,
                "frame_id": frame_id,
            },
        )
    with open(out_path, "w") as fh:
        for det in response["detections"]:
            row = {k: v for k, v in det.items() if v is not None}
            fh.write(json.dumps(row) + "\n")
    click.echo(
        f"{len(response['detections'])} detection(s), {response['dropped']} dropped"
    )


@main.command(name="eval")
@common_options
@click.option("--dets", type=click.Path(exists=True), required=True,
              help="Detections JSONL (scored).")
@click.option("--gts", type=click.Path(exists=True), required=True,
              help="Ground-truth JSONL.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the full JSON report here.")
@click.pass_context
def eval_cmd(ctx, config_path, dataset, dets, gts, out_path):
    """Evaluate detections: AP / mAP with distance buckets, or AP/APH levels."""
    config = _load_config(config_path, dataset)
    protocol = (
        ("waymo" if config.eval.difficulty == "waymo" else "once")
        if config_path
        else dataset
    )

    def rows(path):
        out = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out

    with _client(ctx) as client:
        response = client.post(
            "/evaluate",
            {
                "config": config.to_dict(),
                "dataset": protocol,
                "detections": rows(dets),
                "ground_truths": rows(gts),
            },
        )
    click.echo(response["table"])
    if out_path:
        Path(out_path).write_text(json.dumps(response["report"], indent=2) + "\n")


@main.command()
@common_options
@click.option("--fixture", default=None, help="Canonical fixture name.")
@click.option("--list", "list_fixtures", is_flag=True, help="List fixture names.")
@click.option("--out-cloud", type=click.Path(), default=None)
@click.option("--out-boxes", type=click.Path(), default=None)
@click.pass_context
def synth(ctx, config_path, dataset, fixture, list_fixtures, out_cloud, out_boxes):
    """Generate a synthetic ray-cast frame from the fixture library."""
    config = _load_config(config_path, dataset)
    with _client(ctx) as client:
        if list_fixtures:
            for name in client.get("/synth/fixtures"):
                click.echo(name)
            return
        if not fixture:
            raise click.UsageError("pass --fixture NAME or --list")
        if not (out_cloud and out_boxes):
            raise click.UsageError("--out-cloud and --out-boxes are required")
        frame = client.get(f"/synth/fixture/{fixture}")
    _write_frame_response(frame, out_cloud, out_boxes)
    row_bytes = 4 * (3 + config.attr_dim)
    click.echo(
        f"{frame['frame_id']}: "
        f"{len(base64.b64decode(frame['cloud_b64'])) // row_bytes} points, "
        f"{len(frame['boxes'])} box(es)"
    )


@main.command(name="dump-heatmap")
@click.option("--input", "input_path", type=click.Path(exists=True), required=True,
              help="Heatmap TNS1 (H x W x C).")
@click.option("--channel", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_context
def dump_heatmap(ctx, input_path, channel, out_path):
    """Render one heatmap channel as a PGM image."""
    with _client(ctx) as client:
        response = client.post(
            "/heatmap/pgm", {"tns1_b64": _b64_file(input_path), "channel": channel}
        )
    _write_b64(out_path, response["pgm_b64"])
    click.echo(f"{response['width']}x{response['height']} -> {out_path}")


def run():
    try:
        main(standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)
    except (ServiceError, DataFormatError, ValueError) as exc:
        _fail(str(exc))


if __name__ == "__main__":
    run()
