"""From raw pen signal to feature matrix.

Generates a small synthetic cohort, writes one recording to disk in the
tablet text format, parses it back, and derives the full feature set.
Run from the repository root after installing the package:

    python3 demos/01_signals_and_features.py
"""

import tempfile
from pathlib import Path

from pendetect.features import FeatureGroupSelection, assemble_features, dump_csv
from pendetect.signal_io import generate_synthetic, parse_tablet_file, write_tablet_file

sequences = generate_synthetic(
    n_subjects_per_class=3,
    length_range=(120, 200),
    class_separation=1.0,
    seed=7,
)
print(f"generated {len(sequences)} sequences")
for seq in sequences:
    print(f"  {seq.subject_id:12s} label={seq.label} n={len(seq.channels['x'])}")

# Round-trip one recording through the on-disk format.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "demo.svc"
    write_tablet_file(sequences[0], path)
    print(f"\nfirst lines of {path.name}:")
    for line in path.read_text().splitlines()[:4]:
        print(f"  {line}")
    parsed = parse_tablet_file(path, subject_id="demo", label="PD")

    # Derive every feature group and show what each contributes.
    for group in ("raw", "inclination", "pressure", "kinematic", "derived"):
        fm = assemble_features(parsed, FeatureGroupSelection.of(group))
        print(f"{group:12s} -> {fm.m:2d} columns: {', '.join(fm.column_names[:4])}"
              + (", ..." if fm.m > 4 else ""))

    # The kinematic block is the one the classifier usually sees.
    fm = assemble_features(parsed, FeatureGroupSelection.of("kinematic"))
    out = Path(tmp) / "features.csv"
    dump_csv(fm, out)
    print(f"\nwrote {fm.length} rows x {fm.m} columns to {out.name}")
    print("velocity column, first five values:",
          [round(float(v), 3) for v in fm.column("velocity")[:5]])
