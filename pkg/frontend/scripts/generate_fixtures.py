"""Regenerate the parity fixtures by exercising the service over HTTP.

Usage: python3 scripts/generate_fixtures.py [base_url]

With no argument the app is served in-process; with a base URL an already
running server is used. Output: fixtures/fixtures.json, a list of
{name, method, path, request, response, status} entries.
"""

import json
import pathlib
import sys


def main():
    if len(sys.argv) > 1:
        import httpx

        client = httpx.Client(base_url=sys.argv[1])
    else:
        from fastapi.testclient import TestClient

        from topomol.service.app import app

        client = TestClient(app)

    import numpy as np

    rng = np.random.default_rng(7)
    fixtures = []

    def add(name, method, path, request=None):
        if method == "GET":
            r = client.get(path)
        else:
            r = client.post(path, json=request)
        fixtures.append(
            {
                "name": name,
                "method": method,
                "path": path,
                "request": request,
                "response": r.json(),
                "status": r.status_code,
            }
        )

    smiles_ok = [
        "C", "CC", "CCO", "CCN", "CCCO", "CC(C)O", "CC(C)(C)C", "c1ccccc1",
        "c1ccncc1", "C1CCCCC1", "C1CCOCC1", "C1CC1", "C1CCC1O", "CC(=O)O",
        "CC(=O)OC", "N#CC", "O=C=O", "CCS", "CCCl", "CCBr", "CCF", "NCCO",
        "CNC", "CN(C)C", "OCCO", "C1COC1", "c1ccc2ccccc2c1", "CC1=CC(=O)CC1",
        "C%10CCC%10", "CC.OC",
    ]
    for s in smiles_ok:
        add(f"parse {s}", "POST", "/parse", {"smiles": s})
    for s in ["C((", "C1CC", "X", "C)C"]:
        add(f"parse error {s}", "POST", "/parse", {"smiles": s})

    add("health", "GET", "/health")

    for s in ["CCO", "c1ccncc1", "C1CCOCC1", "CC(=O)O"]:
        for flt in ["atomic_number", "degree", "hks"]:
            add(f"diagram {s} {flt}", "POST", "/diagram", {"smiles": s, "filter": flt})
    add("diagram hks t", "POST", "/diagram", {"smiles": "CCO", "filter": "hks", "hks_t": 0.5})

    add(
        "fingerprint atom",
        "POST",
        "/fingerprint",
        {"smiles": ["CCO", "CCN", "CC(C)O"], "filters": "atom"},
    )
    add(
        "fingerprint ahd res8",
        "POST",
        "/fingerprint",
        {"smiles": ["c1ccncc1", "C1COC1"], "filters": "ahd", "resolution": 8},
    )
    add(
        "fingerprint sigma",
        "POST",
        "/fingerprint",
        {"smiles": ["CCO"], "filters": "degree", "sigma": 0.25},
    )
    add("fingerprint bad preset", "POST", "/fingerprint", {"smiles": ["CC"], "filters": "zap"})

    def mat(n, m):
        return [[float(x) for x in row] for row in rng.standard_normal((n, m))]

    for trial in range(5):
        n = 3 + trial
        add(
            f"tdl {trial}",
            "POST",
            "/loss/tdl",
            {"z": mat(n, 4), "fingerprints": mat(n, 6), "tau": 0.1 + 0.1 * trial},
        )
    for trial in range(3):
        n = 4 + trial
        add(
            f"tdl-grad {trial}",
            "POST",
            "/loss/tdl-grad",
            {"z": mat(n, 3), "fingerprints": mat(n, 5), "tau": 0.5, "n": trial, "i": 1 + trial},
        )
    for trial in range(3):
        add(
            f"tae {trial}",
            "POST",
            "/loss/tae",
            {"h": mat(3, 7), "fingerprints": mat(3, 7)},
        )
    for trial in range(3):
        add(
            f"ntxent {trial}",
            "POST",
            "/loss/ntxent",
            {"z_i": mat(4, 5), "z_j": mat(4, 5), "tau": 0.2},
        )
    add("tdl bad shapes", "POST", "/loss/tdl", {"z": [[1.0, 2.0]], "fingerprints": [[1.0]], "tau": 0.1})

    out = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "fixtures.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(fixtures, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(fixtures)} fixtures to {out}")


if __name__ == "__main__":
    main()
