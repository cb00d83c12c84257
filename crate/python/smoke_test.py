"""Smoke test for the xdis Python extension.

Build and run from the repository root:

    cargo build -p xdis-py --release
    cp target/release/libxdis.so python/xdis.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import xdis  # noqa: E402


def check_preprocessing():
    text, prot = xdis.preprocess_text("Visit www.bbc.co.uk now")
    assert text == "Visit www[WEB_PERIOD_TOKEN]bbc[WEB_PERIOD_TOKEN]co[WEB_PERIOD_TOKEN]uk now.", text
    assert len(prot) == 3
    text, prot = xdis.preprocess_text("J. Smith paid 3.14")
    assert xdis.restore_protected(text, prot) == "J. Smith paid 3.14."
    assert xdis.split_sentences("A cat sat. A dog ran.") == ["A cat sat.", "A dog ran."]

    art = xdis.Article("a1", "One. Two words. Three more words here.", budget=3)
    assert art.sentences == ["One.", "Two words."], art.sentences
    assert art.truncated and len(art) == 2


def check_metrics():
    a = [0.9, 0.1, 0.5, 0.2]
    b = [0.8, 0.7, 0.1, 0.3]
    assert xdis.top_features(a, 2) == [0, 2]
    assert xdis.feature_agreement(a, b, 2) == 0.5
    assert xdis.rank_agreement(a, b, 2) == 0.5
    assert xdis.pairwise_rank_agreement(a, a) == 1.0
    assert math.isclose(xdis.spearman(a, [-x for x in a]), 1.0)
    assert xdis.spearman(a, [-x for x in a], signed=True) == -1.0
    assert xdis.normalize_minmax([2.0, 4.0, 6.0]) == [0.0, 0.5, 1.0]
    try:
        xdis.spearman([1.0, 1.0, 1.0], a[:3])
    except ValueError:
        pass
    else:
        raise AssertionError("constant ranking should be undefined")


def check_clustering():
    pts = [[1.0, 0.0, 0.01 * i] for i in range(5)] + [[0.0, 1.0, 0.01 * i] for i in range(5)]
    labels, centroids, wcss = xdis.kmeans(pts, 2, seed=1)
    assert len(set(labels[:5])) == 1 and len(set(labels[5:])) == 1 and labels[0] != labels[5]
    assert len(centroids) == 2 and wcss >= 0.0
    assert xdis.silhouette(pts, labels) > 0.9
    chosen, sil, wcss_curve = xdis.select_optimal_k(pts, k_range=(2, 5))
    assert chosen == 2 and len(sil) == len(wcss_curve) == 4
    assert xdis.average_optimal_k([2, 3]) == 3
    emb = xdis.lexical_embed(["abc", "abc", "xyz"], dim=16)
    assert emb[0] == emb[1] != emb[2]


def check_reports():
    articles = [
        ("n1", "The storm hit. Boats sank. The council met. Repairs began. The mayor spoke."),
        ("n2", "Prices rose. Traders worried. Markets fell. Banks reacted."),
    ]
    records = []
    for aid, n in [("n1", 5), ("n2", 4)]:
        records.append(json.dumps({"article_id": aid, "method": "lime", "sentence_scores": list(range(n))}))
        records.append(json.dumps({"article_id": aid, "method": "attention", "sentence_scores": list(range(n, 0, -1))}))
    g = json.loads(xdis.global_report(articles, records, k=[2, 3]))
    assert g["scope"] == "global"
    assert len(g["matrices"]) == 2 * 2 + 2
    r_json = xdis.regional_report(articles, records, k=[2, 3])
    r = json.loads(r_json)
    assert r["scope"] == "regional"
    cmp = json.loads(xdis.compare_reports(xdis.global_report(articles, records, k=[2, 3]), r_json))
    assert cmp["rows"]


def main():
    check_preprocessing()
    check_metrics()
    check_clustering()
    check_reports()
    print(f"xdis {xdis.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
