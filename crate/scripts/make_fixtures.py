#!/usr/bin/env python3
"""Regenerates the test fixtures under crates/core/tests/data.

Everything is seeded, so rerunning produces identical files. Reference
values come from independent tools:

* golden/reference.tsv: pytrec_eval (trec_eval bindings) for P, ndcg_cut,
  bpref and map; RBP from the plain formula below.
* porter/vocab.tsv: NLTK's PorterStemmer in MARTIN_EXTENSIONS mode.

Requires: pip install pytrec_eval-terrier nltk
"""

import csv
import json
import math
import random
import re
from pathlib import Path

import pytrec_eval
from nltk.stem.porter import PorterStemmer

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "crates" / "core" / "tests" / "data"

TOPICS = [
    (
        "coronavirus origin",
        "what is the origin of COVID-19",
        "seeking range of information about the SARS-CoV-2 virus's origin, including its evolution, "
        "animal source, and first transmission into humans",
    ),
    (
        "coronavirus response to weather changes",
        "how does the coronavirus respond to changes in the weather",
        "seeking range of information about the SARS-CoV-2 virus viability in different weather/climate "
        "conditions as well as information related to transmission of the virus in different climate conditions",
    ),
    (
        "coronavirus immunity",
        "will SARS-CoV-2 infected people develop immunity? Is cross protection possible?",
        "seeking studies of immunity developed due to infection with SARS-CoV-2 or cross protection gained "
        "due to infection with other coronavirus types",
    ),
    (
        "how do people die from the coronavirus",
        "what causes death from Covid-19?",
        "Studies looking at mechanisms of death from Covid-19.",
    ),
    (
        "animal models of COVID-19",
        "what drugs have been active against SARS-CoV or SARS-CoV-2 in animal studies?",
        "Papers that describe the results of testing drugs that bind to spike proteins of the virus or any "
        "other drugs in any animal models. Papers about SARS-CoV-2 infection in cell culture assays are also relevant.",
    ),
]

THEMES = [
    "origin bats zoonotic wuhan market spillover reservoir pangolin phylogenetic ancestor evolution recombination".split(),
    "weather temperature humidity seasonal climate transmission summer winter ultraviolet latitude viability".split(),
    "immunity antibodies immune response neutralizing serology reinfection protective memory cross protection".split(),
    "death mortality fatal respiratory failure organ cytokine storm ards comorbidities die mechanisms".split(),
    "animal models mice ferrets macaques hamsters transgenic ace2 drugs challenge remdesivir spike".split(),
]

GENERAL = (
    "coronavirus covid-19 sars-cov-2 patients study clinical data analysis virus viral disease results "
    "outbreak pandemic cases hospital health public novel sars mers influenza epidemic protein cells "
    "samples the of and in to a with for from was were is are by on this that these we our using"
).split()

BACKGROUND = (
    "vaccine trial diagnosis testing pcr imaging lung ct symptoms fever cough children pregnancy "
    "economic policy lockdown mobility hospitals staff masks distancing genome sequencing bioinformatics"
).split()

SOURCES = [("biorxiv", 2), ("CZI", 1), ("Elsevier", 5), ("medrxiv", 3), ("PMC", 6), ("WHO", 2)]


def words(rng, theme, n):
    out = []
    for _ in range(n):
        r = rng.random()
        if theme is not None and r < 0.35:
            out.append(rng.choice(THEMES[theme]))
        elif r < 0.55:
            out.append(rng.choice(BACKGROUND))
        else:
            out.append(rng.choice(GENERAL))
    return out


def sentence(ws):
    text = " ".join(ws)
    return text[0].upper() + text[1:] + "."


def make_corpus(rng):
    records = []
    for i in range(200):
        uid = f"t{i:04d}"
        theme = i % 6 if i % 6 < 5 else None
        title = sentence(words(rng, theme, rng.randint(5, 10)))
        abstract = "" if i % 37 == 5 else " ".join(sentence(words(rng, theme, rng.randint(8, 14))) for _ in range(4))
        year = 2020 if rng.random() < 0.45 else rng.randint(2003, 2019)
        if rng.random() < 0.15:
            publish = str(year)
        else:
            publish = f"{year}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
        source = rng.choices([s for s, _ in SOURCES], weights=[w for _, w in SOURCES])[0]
        n_par = rng.choice([0, 1, 2, 3, 4])
        paragraphs = [" ".join(sentence(words(rng, theme, rng.randint(6, 12))) for _ in range(3)) for _ in range(n_par)]
        records.append(
            {
                "cord_uid": uid,
                "sha": f"{rng.getrandbits(64):016x}",
                "source_x": source,
                "title": title,
                "doi": f"10.1000/toy.{i}",
                "abstract": abstract,
                "publish_time": publish,
                "journal": rng.choice(["J Virol", "Lancet", "Nature", "BMJ", ""]),
                "theme": theme,
                "paragraphs": paragraphs,
            }
        )
    return records


def write_corpus(records, out):
    cols = ["cord_uid", "sha", "source_x", "title", "doi", "abstract", "publish_time", "journal"]
    with open(out / "metadata.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([r[c] for c in cols])
    with open(out / "fulltext.jsonl", "w") as f:
        for r in records:
            if r["paragraphs"]:
                f.write(json.dumps({"doc_id": r["cord_uid"], "paragraphs": r["paragraphs"]}) + "\n")


def write_topics(path, topics):
    lines = ['<topics task="COVIDSearch 2020" batch="1">']
    for n, (q, qu, na) in enumerate(topics, 1):
        lines += [
            f'  <topic number="{n}">',
            f"    <query>{q}</query>",
            f"    <question>{qu}</question>",
            f"    <narrative>{na}</narrative>",
            "  </topic>",
        ]
    lines.append("</topics>")
    path.write_text("\n".join(lines) + "\n")


def make_qrels(rng, records):
    qrels = {}
    for t in range(5):
        judged = {}
        for r in records:
            if r["theme"] == t:
                judged[r["cord_uid"]] = rng.choices([0, 1, 2], weights=[2, 3, 4])[0]
        others = [r["cord_uid"] for r in records if r["theme"] != t]
        for uid in rng.sample(others, 12):
            judged[uid] = 0
        qrels[t + 1] = judged
    return qrels


def write_qrels(path, qrels):
    with open(path, "w") as f:
        for t in sorted(qrels):
            for d in sorted(qrels[t]):
                f.write(f"{t} 0 {d} {qrels[t][d]}\n")


def write_run(path, run, tag, decimals=4):
    with open(path, "w") as f:
        for t in sorted(run):
            for rank, (d, s) in enumerate(run[t], 1):
                f.write(f"{t} Q0 {d} {rank} {s:.{decimals}f} {tag}\n")


def trec_sorted(scored):
    # descending score, then descending id, as trec_eval orders
    return sorted(scored, key=lambda x: (x[1], x[0]), reverse=True)


def make_external_runs(rng, records, out):
    ext = out / "external"
    ext.mkdir(exist_ok=True)
    for k in range(27):
        quality = 0.2 + 2.0 * rng.random()
        run = {}
        for t in range(5):
            scored = []
            for r in records:
                s = rng.gauss(0, 1) + (quality if r["theme"] == t else 0.0)
                scored.append((r["cord_uid"], round(10 + s, 4)))
            run[t + 1] = trec_sorted(scored)[:100]
        write_run(ext / f"ext{k + 1:02d}.run", run, f"ext{k + 1:02d}")


def write_lexicon(path):
    rows = [
        ("covid-19", "COVID-19", "disease"),
        ("covid 19", "COVID-19", "disease"),
        ("sars-cov-2", "SARS-CoV-2", "virus"),
        ("sars cov 2", "SARS-CoV-2", "virus"),
        ("sars-cov", "SARS-CoV", "virus"),
        ("coronavirus", "coronavirus", "virus"),
        ("bats", "bat", "organism"),
        ("animal", "animal", "organism"),
        ("mice", "mouse", "organism"),
        ("spike proteins", "spike protein", "protein"),
        ("immunity", "immunity", "physiology"),
        ("death", "death", "outcome"),
        ("weather", "weather", "environment"),
        ("climate", "climate", "environment"),
        ("infection", "infection", "condition"),
        ("pain", "pain", "condition"),
        ("stomach", "stomach", "anatomy"),
        ("lung", "lung", "anatomy"),
        ("drugs", "drug", "chemical"),
    ]
    with open(path, "w") as f:
        f.write("surface\tlabel\tentity_type\n")
        for r in rows:
            f.write("\t".join(r) + "\n")


def write_ontology(path):
    concepts = [
        {"label": "disease", "parents": [], "children": ["infectious disease"], "synonyms": []},
        {"label": "infectious disease", "parents": ["disease"], "children": ["viral infectious disease"], "synonyms": []},
        {
            "label": "viral infectious disease",
            "parents": ["infectious disease"],
            "children": ["coronavirus infection", "influenza"],
            "synonyms": [],
        },
        {
            "label": "coronavirus infection",
            "parents": ["viral infectious disease"],
            "children": ["COVID-19", "severe acute respiratory syndrome", "middle east respiratory syndrome"],
            "synonyms": ["coronavirus disease"],
        },
        {"label": "COVID-19", "parents": ["coronavirus infection"], "children": [], "synonyms": ["covid 19", "sars-cov-2 infection"]},
        {"label": "severe acute respiratory syndrome", "parents": ["coronavirus infection"], "children": [], "synonyms": ["sars"]},
        {"label": "middle east respiratory syndrome", "parents": ["coronavirus infection"], "children": [], "synonyms": ["mers"]},
        {"label": "influenza", "parents": ["viral infectious disease"], "children": [], "synonyms": ["flu"]},
        {"label": "respiratory failure", "parents": ["disease"], "children": ["ards"], "synonyms": []},
        {"label": "ards", "parents": ["respiratory failure", "missing concept"], "children": [], "synonyms": []},
    ]
    with open(path, "w") as f:
        for c in concepts:
            f.write(json.dumps(c) + "\n")


def write_vectors(rng, records, path):
    dim = 8
    with open(path, "w") as f:
        for r in records:
            v = [round(rng.gauss(0, 0.6), 4) for _ in range(dim)]
            if r["theme"] is not None:
                v[r["theme"]] += 1.0
            f.write(json.dumps({"id": r["cord_uid"], "vector": v}) + "\n")
        for t in range(5):
            v = [0.0] * dim
            v[t] = 1.0
            v[7] = 0.1
            f.write(json.dumps({"id": f"topic:{t + 1}", "vector": v}) + "\n")


TOY_CONFIG = """seed = 2020
output_dir = "out"
recipes = [
  "ku_run1",
  "ku_run2",
  "ku_run3",
  "fusionOfRuns",
  "fusionOfFusions",
  "allFiltering",
  "soboroffFiltering",
]

[corpus]
metadata = "metadata.csv"
fulltext = "fulltext.jsonl"

[resources]
topics = "topics.xml"
qrels = "qrels.txt"
ontology = "ontology.jsonl"
lexicon = "lexicon.tsv"
vectors = "vectors.jsonl"
external_runs = ["external"]

[bm25]
k1 = 1.2
b = 0.75

[rrf]
k = 60.0

[rerank]
top_n = 50
boost_year = 2020

[soboroff]
pool_depth = 100
sample_fraction = 0.1
trials = 50
select_middle = 9
"""


def make_toy():
    rng = random.Random(2020)
    out = DATA / "toy"
    out.mkdir(parents=True, exist_ok=True)
    records = make_corpus(rng)
    write_corpus(records, out)
    write_topics(out / "topics.xml", TOPICS)
    write_qrels(out / "qrels.txt", make_qrels(rng, records))
    make_external_runs(rng, records, out)
    write_lexicon(out / "lexicon.tsv")
    write_ontology(out / "ontology.jsonl")
    write_vectors(rng, records, out / "vectors.jsonl")
    (out / "pipeline.toml").write_text(TOY_CONFIG)
    return records


# --- golden trec_eval fixture -------------------------------------------

CUTS = [5, 10, 15, 20, 30]


def rbp(ranking, judged, p=0.5):
    return sum((1 - p) * p**i for i, d in enumerate(ranking) if judged.get(d, 0) >= 1)


def make_golden():
    rng = random.Random(4242)
    out = DATA / "golden"
    out.mkdir(parents=True, exist_ok=True)
    run, qrels = {}, {}
    for t in range(1, 6):
        pool = [f"g{t}-{i:03d}" for i in range(90)]
        retrieved = rng.sample(pool, rng.randint(25, 60))
        scored = []
        for d in retrieved:
            # coarse scores so ties occur
            scored.append((d, round(rng.choice([1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]) + rng.choice([0, 0, 0.25]), 2)))
        run[t] = trec_sorted(scored)
        judged_ids = rng.sample(pool, rng.randint(30, 55))
        qrels[t] = {d: rng.choices([0, 1, 2], weights=[5, 2, 2])[0] for d in judged_ids}
        if not any(g >= 1 for g in qrels[t].values()):
            qrels[t][judged_ids[0]] = 2
    write_run(out / "run.txt", run, "golden", decimals=2)
    write_qrels(out / "qrels.txt", qrels)

    measures = {f"P_{k}" for k in CUTS} | {f"ndcg_cut_{k}" for k in CUTS} | {"bpref", "map"}
    ev = pytrec_eval.RelevanceEvaluator({str(t): q for t, q in qrels.items()}, measures)
    res = ev.evaluate({str(t): {d: s for d, s in r} for t, r in run.items()})
    lines = ["# measure\ttopic\tvalue"]
    names = [f"P_{k}" for k in CUTS] + [f"ndcg_cut_{k}" for k in CUTS] + ["bpref", "map", "rbp"]
    for name in names:
        vals = []
        for t in range(1, 6):
            if name == "rbp":
                v = rbp([d for d, _ in run[t]], qrels[t])
            else:
                v = res[str(t)][name]
            vals.append(v)
            lines.append(f"{name}\t{t}\t{v!r}")
        lines.append(f"{name}\tall\t{sum(vals) / len(vals)!r}")
    (out / "reference.tsv").write_text("\n".join(lines) + "\n")


# --- agreement fixture --------------------------------------------------


def make_agreement():
    rng = random.Random(47)
    out = DATA / "agreement"
    out.mkdir(parents=True, exist_ok=True)
    common, only_ours, agreed = 243, 55, 127
    pairs = [(rng.randint(1, 30), f"a{i:05d}") for i in range(common + only_ours + 400)]
    ours, nist = {}, {}
    for i, (t, d) in enumerate(pairs):
        if i < common:
            g = rng.choice([0, 1, 2])
            ours[(t, d)] = g
            nist[(t, d)] = g if i < agreed else (g + rng.choice([1, 2])) % 3
        elif i < common + only_ours:
            ours[(t, d)] = rng.choice([0, 1, 2])
        else:
            nist[(t, d)] = rng.choice([0, 0, 0, 1, 2])
    for name, q in [("ours.txt", ours), ("nist.txt", nist)]:
        with open(out / name, "w") as f:
            for (t, d), g in sorted(q.items()):
                f.write(f"{t} 0 {d} {g}\n")


# --- Porter oracle vocabulary ------------------------------------------

CLASSIC = """caresses ponies ties caress cats feed agreed plastered bled motoring sing conflated troubled
sized hopping tanned falling hissing fizzed failing filing happy sky relational conditional rational
valenci hesitanci digitizer conformabli radicalli differentli vileli analogousli vietnamization
predication operator feudalism decisiveness hopefulness callousness formaliti sensitiviti sensibiliti
triplicate formative formalize electriciti electrical hopeful goodness revival allowance inference
airliner gyroscopic adjustable defensible irritant replacement adjustment dependent adoption homologou
communism activate angulariti homologous effective bowdlerize probate rate cease controll roll
generalizations oscillators generalization transmissions coronavirus archaeology anthropology
biologically probability abbreviation sensibility eed proceed exceed succeed news innings""".split()


def make_porter(records):
    vocab = set(CLASSIC)
    for r in records:
        text = " ".join([r["title"], r["abstract"], *r["paragraphs"]])
        vocab.update(re.findall(r"[a-z]+", text.lower()))
    for q, qu, na in TOPICS:
        vocab.update(re.findall(r"[a-z]+", f"{q} {qu} {na}".lower()))
    for path in sorted((ROOT / "examples").rglob("*.rs")):
        for line in path.read_text(errors="ignore").splitlines():
            if line.strip().startswith("//"):
                vocab.update(w for w in re.findall(r"[a-z]+", line) if len(w) < 25)
    stemmer = PorterStemmer(mode=PorterStemmer.MARTIN_EXTENSIONS)
    out = DATA / "porter"
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "vocab.tsv", "w") as f:
        for w in sorted(vocab):
            f.write(f"{w}\t{stemmer.stem(w)}\n")


def main():
    records = make_toy()
    make_golden()
    make_agreement()
    make_porter(records)


if __name__ == "__main__":
    main()
