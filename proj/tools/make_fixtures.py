#!/usr/bin/env python3
"""Regenerates fixtures/ and its checksum manifest."""

import hashlib
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def step(caller, callee, op, prob=1.0):
    return {"caller": caller, "callee": callee, "operation": op, "prob": prob}


def open_scenario(name, rate, steps):
    return {"name": name, "workload": {"pattern": "OPEN", "rate": rate}, "steps": steps}


def model(components, links, scenarios):
    comps = [{"name": c, "operations": [{"name": o} for o in ops]} for c, ops in components.items()]
    nodes = [{"name": f"{c}-container", "hosts": [c]} for c in components]
    node_links = sorted(sorted([f"{a}-container", f"{b}-container"]) for a, b in links)
    return {"components": comps, "nodes": nodes, "node_links": node_links, "scenarios": scenarios}


def run_config(seed, duration, warmup, window, arrivals, means, **extra):
    doc = {
        "seed": seed,
        "duration_s": duration,
        "warmup_s": warmup,
        "sample_window_s": window,
        "arrivals": [{"scenario": s, "rate_per_s": r} for s, r in arrivals],
        "service_means": means,
    }
    doc.update(extra)
    return doc


def eshopper():
    components = {
        "web": ["home", "categories"],
        "categories": ["category"],
        "products": ["findproductsrandom", "getproduct"],
        "items": ["findfeaturesitemrandom", "finditem", "setavailability"],
        "cart": ["getcart"],
        "users": ["getuser"],
        "auth": ["verify"],
        "orders": ["getorders"],
        "warehouse": ["stock"],
    }
    links = [
        ("web", "categories"), ("web", "products"), ("web", "items"), ("web", "users"), ("web", "cart"),
        ("users", "auth"), ("products", "items"), ("warehouse", "web"), ("warehouse", "items"),
        ("warehouse", "orders"), ("orders", "web"), ("warehouse", "auth"),
    ]
    scenarios = [
        open_scenario("Desktop", 3.8, [
            step(None, "web", "home"),
            step("web", "categories", "category"),
            step("web", "products", "findproductsrandom"),
            step("web", "products", "getproduct"),
            step("web", "items", "findfeaturesitemrandom"),
            step("web", "users", "getuser"),
            step("users", "auth", "verify"),
            step("web", "cart", "getcart"),
            step("cart", "web", "categories"),
        ]),
        open_scenario("Mobile", 225.0, [
            step(None, "products", "getproduct"),
            step("products", "web", "categories"),
            step("products", "items", "finditem"),
        ]),
        open_scenario("Warehouse", 17.5, [
            step(None, "warehouse", "stock"),
            step("warehouse", "web", "categories"),
            step("warehouse", "items", "setavailability"),
            step("warehouse", "orders", "getorders"),
            step("orders", "web", "categories"),
            step("warehouse", "auth", "verify"),
        ]),
    ]
    means = {
        "web/home": 0.19, "web/categories": 0.0004, "categories/category": 0.03,
        "products/findproductsrandom": 0.02, "products/getproduct": 0.001,
        "items/findfeaturesitemrandom": 0.01, "items/finditem": 0.0025, "items/setavailability": 0.002,
        "users/getuser": 0.015, "auth/verify": 0.004, "cart/getcart": 0.02, "orders/getorders": 0.01,
        "warehouse/stock": 0.02,
    }
    run = run_config(42, 150.0, 30.0, 30.0, [("Desktop", 3.8), ("Mobile", 225.0), ("Warehouse", 17.5)], means,
                     target_scenario="Desktop")
    expected = {
        "components": {"value": 9, "basis": "reported"},
        "rates": {"value": {"Desktop": 3.8, "Mobile": 225.0, "Warehouse": 17.5}, "basis": "reported"},
        "bottleneck": {"value": "web", "basis": "computed",
                       "note": "web carries the largest offered load: 3.8*0.19 + 225*0.0004 + 35*0.0004"},
        "web_utilization": {"value": 3.8 * 0.19 + 3.8 * 0.0004 + 225 * 0.0004 + 35 * 0.0004, "basis": "computed"},
        "top_occurrence_target": {"value": "web", "basis": "computed"},
    }
    return model(components, links, scenarios), run, expected


def trainticket():
    components = {
        "rebook": ["rebook"],
        "sso": ["verify", "updateaccount"],
        "order": ["getorder", "updateorder"],
        "travel": ["gettrip"],
        "seat": ["getseat"],
        "admin-user": ["updateuser"],
        "verification-code": ["generate", "check"],
    }
    links = [
        ("rebook", "sso"), ("rebook", "order"), ("rebook", "travel"), ("rebook", "seat"),
        ("rebook", "verification-code"), ("admin-user", "sso"), ("admin-user", "verification-code"),
    ]
    scenarios = [
        open_scenario("Rebook Ticket", 4.5, [
            step(None, "rebook", "rebook"),
            step("rebook", "sso", "verify"),
            step("rebook", "verification-code", "check"),
            step("rebook", "order", "getorder"),
            step("rebook", "travel", "gettrip"),
            step("rebook", "seat", "getseat"),
            step("rebook", "order", "updateorder"),
        ]),
        open_scenario("Update User", 2.75, [
            step(None, "admin-user", "updateuser"),
            step("admin-user", "sso", "verify"),
            step("admin-user", "verification-code", "generate"),
            step("admin-user", "sso", "updateaccount"),
        ]),
    ]
    means = {
        "rebook/rebook": 0.08, "sso/verify": 0.01, "sso/updateaccount": 0.02, "order/getorder": 0.02,
        "order/updateorder": 0.02, "travel/gettrip": 0.03, "seat/getseat": 0.02, "admin-user/updateuser": 0.03,
        "verification-code/generate": 0.25, "verification-code/check": 0.005,
    }
    run = run_config(7, 240.0, 30.0, 30.0, [("Rebook Ticket", 4.5), ("Update User", 2.75)], means,
                     target_scenario="Update User")
    expected = {
        "components": {"value": 7, "basis": "computed"},
        "rates": {"value": {"Rebook Ticket": 4.5, "Update User": 2.75}, "basis": "reported"},
        "bottleneck": {"value": "verification-code", "basis": "computed"},
    }
    return model(components, links, scenarios), run, expected


def mm1():
    components = {"server": ["serve"]}
    scenarios = [open_scenario("Request", 50.0, [step(None, "server", "serve")])]
    s, lam = 0.01, 50.0
    rho = lam * s
    run = run_config(1, 600.0, 30.0, 60.0, [("Request", lam)], {"server/serve": s})
    expected = {
        "utilization": {"value": rho, "basis": "definition", "formula": "lambda*S"},
        "sojourn_s": {"value": s / (1 - rho), "basis": "definition", "formula": "S/(1-rho)"},
        "queue_length": {"value": rho / (1 - rho), "basis": "definition", "formula": "rho/(1-rho)"},
    }
    return model(components, [], scenarios), run, expected


def two_station():
    components = {"front": ["handle"], "back": ["query", "store"]}
    scenarios = [
        open_scenario("Flow", 20.0, [step(None, "front", "handle"), step("front", "back", "query"),
                                      step("front", "back", "store", 0.5)]),
    ]
    means = {"front/handle": 0.02, "back/query": 0.02, "back/store": 0.02}
    run = run_config(3, 300.0, 30.0, 30.0, [("Flow", 20.0)], means)
    expected = {
        "utilization": {"value": {"front": 0.4, "back": 0.6}, "basis": "computed",
                        "formula": "rate * sum(prob * S) per station"},
        "resp_time_s": {"value": 0.02 / 0.6 + 0.03 / 0.4, "basis": "computed",
                        "formula": "sum of D_k/(1-U_k), product-form open network"},
    }
    return model(components, [("front", "back")], scenarios), run, expected


def dump(obj):
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def main():
    files = {}
    for name, build in [("eshopper", eshopper), ("trainticket-subset", trainticket), ("mm1", mm1),
                        ("two-station", two_station)]:
        m, run, expected = build()
        d = ROOT / name
        d.mkdir(parents=True, exist_ok=True)
        for fname, obj in [("model.json", m), ("run.json", run), ("expected.json", expected)]:
            text = dump(obj)
            (d / fname).write_text(text)
            files[f"{name}/{fname}"] = hashlib.sha256(text.encode()).hexdigest()
    (ROOT / "manifest.json").write_text(dump({"files": dict(sorted(files.items()))}))


if __name__ == "__main__":
    main()
