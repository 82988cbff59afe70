"""Protocol presets for the three supported modes."""

# Each preset fixes the anchor policy and commit rules; k/offset/timeout are defaults
# that scenarios may override.
PROTOCOL_SPECS = {
    "bullshark": {
        "anchors": "round_robin_odd",   # one leader every other round
        "fast_commit": False,
        "round_timeout": 0.0,
        "parents": "first_quorum",      # earliest n - f certificates when round_timeout is 0
        "k": 1,
        "offset": 0.0,
    },
    "shoal": {
        "anchors": "reputation_leader",  # one leader every round, reputation-ordered
        "fast_commit": False,
        "round_timeout": 0.0,
        "parents": "first_quorum",      # earliest n - f certificates when round_timeout is 0
        "k": 1,
        "offset": 0.0,
    },
    "shoalpp": {
        "anchors": "reputation_all",     # every eligible replica is a candidate
        "fast_commit": True,
        "round_timeout": 3.5,
        "parents": "all_held",
        "k": 3,
        "offset": 1.0,
    },
}

PROTOCOLS = tuple(PROTOCOL_SPECS)


def get_protocol_spec(protocol: str) -> dict:
    """Return the preset for `protocol`."""
    if protocol not in PROTOCOL_SPECS:
        raise ValueError(f"Unknown protocol mode: {protocol}")
    return PROTOCOL_SPECS[protocol]
