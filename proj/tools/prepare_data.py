#!/usr/bin/env python3
"""Extract the UCI Adult and ProPublica COMPAS tables into the CSV layout
read by the `rifair` loader.

The raw files ship inside the `responsibly` wheel on PyPI:

    pip download responsibly==0.1.2 --no-deps -d /tmp/wheels
    python3 tools/prepare_data.py /tmp/wheels/responsibly-0.1.2-py3-none-any.whl data/

Rows with missing values ('?') are written verbatim; the loader rejects
them and lists them in its load report.
"""
import csv
import io
import sys
import zipfile

ADULT_COLUMNS = ["age", "workclass", "fnlwgt", "education", "education_num",
                 "marital_status", "occupation", "relationship", "race", "sex",
                 "capital_gain", "capital_loss", "hours_per_week",
                 "native_country", "income"]

COMPAS_COLUMNS = ["sex", "age", "age_cat", "race", "juv_fel_count",
                  "juv_misd_count", "juv_other_count", "priors_count",
                  "c_charge_degree", "decile_score", "score_text",
                  "v_decile_score", "v_score_text", "two_year_recid"]


def adult_rows(text):
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("|"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(ADULT_COLUMNS):
            continue
        cells[-1] = cells[-1].rstrip(".")
        row = dict(zip(ADULT_COLUMNS, cells))
        del row["fnlwgt"]
        yield row


def main(wheel, out_dir):
    with zipfile.ZipFile(wheel) as z:
        adult = list(adult_rows(z.read("responsibly/dataset/adult/adult.data").decode()))
        adult += list(adult_rows(z.read("responsibly/dataset/adult/adult.test").decode()))
        compas_raw = z.read("responsibly/dataset/compas/compas-scores-two-years.csv").decode()

    header = [c for c in ADULT_COLUMNS if c != "fnlwgt"]
    with open(f"{out_dir}/adult/adult.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=header, lineterminator="\n")
        w.writeheader()
        w.writerows(adult)

    reader = csv.reader(io.StringIO(compas_raw))
    names = next(reader)
    # the raw header repeats some columns; keep the first occurrence
    index = {}
    for i, n in enumerate(names):
        index.setdefault(n, i)
    with open(f"{out_dir}/compas/compas.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(COMPAS_COLUMNS)
        for row in reader:
            w.writerow([row[index[c]] for c in COMPAS_COLUMNS])


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
