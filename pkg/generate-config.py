#!/usr/bin/env python3

import os
import sys

from pihlab.config import RunConfig


def write_config(target_dir, name, data):
    path = os.path.join(target_dir, name)
    print("Writing {}".format(path))
    RunConfig.from_dict(data).save(path)


# desk-scale runs: enough data for stable models, quick enough to iterate on
DESK = {
    "learning": {"n_episodes": 300},
    "analysis": {"n_episodes": 20},
}


def generate(target_dir):
    os.makedirs(target_dir, exist_ok=True)

    write_config(target_dir, "defaults.json", {})

    for kind in ("linear", "nonlinear"):
        data = dict(DESK, controller={"kind": kind})
        write_config(target_dir, "{}.json".format(kind), data)

    # the linear law settles slowly; give every episode more room
    write_config(target_dir, "linear-long.json", dict(
        DESK,
        controller={"kind": "linear"},
        trajectory={"num_ticks": 4000},
    ))

    # noise-free environment, for checking the controllers against their
    # closed-form steady states
    write_config(target_dir, "noiseless.json", dict(DESK, env={"noise_sigma": 0.0}))

    # the full protocol: 1200 episodes per controller, 100 insertion trials
    write_config(target_dir, "full.json", {
        "learning": {"n_episodes": 1200, "tune": True},
        "insertion": {"n_trials": 100},
        "analysis": {"n_episodes": 50},
    })

    # an intentionally tiny run, for smoke tests of the CLI
    write_config(target_dir, "smoke.json", {
        "trajectory": {"num_ticks": 1000},
        "learning": {"n_episodes": 30, "forest": {"n_trees": 10}},
        "analysis": {"n_episodes": 3},
        "insertion": {"n_trials": 2},
    })


def main():
    if len(sys.argv) != 2:
        print("usage: generate-config.py DIR", file=sys.stderr)
        return 1
    generate(sys.argv[1])
    return 0


if __name__ == "__main__":
    sys.exit(main())
