import random

import pytest

from latseq import (
    Diamond,
    EdgeField,
    Path,
    PreconditionError,
    build_lattice,
    check_path_independence,
    constant_edge_field,
    curvature,
    curvature_field,
    decompose,
    endpoint_potential,
    enumerate_diamonds,
    enumerate_paths,
    make_edge_field,
    parse_poset,
    path_value,
    reference_score,
    rewrite_sequence,
)

from conftest import random_int_field, random_poset


def gradient_field(lattice, phi):
    return EdgeField(
        {(mask, a): phi[mask | 1 << a] - phi[mask] for mask, a in lattice.edge_list}
    )


def random_gradient(rng, lattice):
    phi = {mask: rng.randint(-9, 9) for mask in lattice.nodes}
    return gradient_field(lattice, phi), phi


def test_path_value_empty(b2):
    _, _, g = b2
    assert path_value(g, Path(0, ())) == 0


def test_path_value_b2(b2):
    _, _, g = b2
    assert path_value(g, Path(0, (0, 1))) == 4
    assert path_value(g, Path(0, (1, 0))) == 7


def test_path_value_missing_edge(b2):
    _, _, g = b2
    with pytest.raises(PreconditionError, match="missing"):
        path_value(g, Path(0, (0, 1, 2)))


def test_make_edge_field_domain_check(b2):
    _, lattice, _ = b2
    with pytest.raises(PreconditionError, match="domain"):
        make_edge_field(lattice, {(0, 0): 1.0})


def test_curvature_of_gradient_is_zero():
    rng = random.Random(31)
    p = parse_poset("elem u\nelem v\nelem w\n")
    lattice = build_lattice(p, 0, 3)
    g, _ = random_gradient(rng, lattice)
    for d in enumerate_diamonds(lattice):
        assert curvature(g, d) == 0


def test_curvature_b2_value(b2):
    _, _, g = b2
    assert curvature(g, Diamond(0, 0, 1)) == 3


def test_curvature_negation(b2):
    _, lattice, g = b2
    neg = EdgeField({e: -v for e, v in g.values.items()})
    assert curvature(neg, Diamond(0, 0, 1)) == -3


def test_curvature_linearity():
    rng = random.Random(32)
    p = random_poset(rng, 6)
    lattice = build_lattice(p, 0, 6)
    g1 = random_int_field(rng, lattice)
    g2 = random_int_field(rng, lattice)
    mixed = EdgeField({e: 2 * g1.values[e] - 3 * g2.values[e] for e in lattice.edge_list})
    for d in enumerate_diamonds(lattice):
        assert curvature(mixed, d) == 2 * curvature(g1, d) - 3 * curvature(g2, d)


def test_curvature_field_matches_pointwise(b3):
    rng = random.Random(33)
    _, lattice = b3
    g = random_int_field(rng, lattice)
    field = curvature_field(g, lattice)
    assert len(field.values) == 6
    for d, k in field.values.items():
        assert k == curvature(g, d)


def test_independence_verdicts(b2):
    _, lattice, g = b2
    verdict = check_path_independence(g, lattice)
    assert not verdict.independent
    assert (verdict.witness.base, verdict.witness.u, verdict.witness.v) == (0, 0, 1)
    assert verdict.curvature == 3
    assert check_path_independence(constant_edge_field(lattice), lattice).independent


def test_independence_for_gradient():
    rng = random.Random(34)
    p = random_poset(rng, 6, density=0.2)
    lattice = build_lattice(p, 0, 6)
    g, _ = random_gradient(rng, lattice)
    assert check_path_independence(g, lattice).independent


def test_independence_matches_bruteforce_all_pairs():
    rng = random.Random(35)
    for _ in range(40):
        p = random_poset(rng, rng.randint(2, 6))
        lattice = build_lattice(p, 0, p.n)
        g = random_int_field(rng, lattice, lo=0, hi=2)
        verdict = check_path_independence(g, lattice)
        brute = True
        for end in lattice.nodes:
            for start in lattice.nodes:
                if start & ~end:
                    continue
                vals = {path_value(g, q) for q in enumerate_paths(lattice, start, end)}
                if len(vals) > 1:
                    brute = False
        assert verdict.independent == brute


def test_endpoint_potential_zero_field(b2):
    _, lattice, _ = b2
    phi = endpoint_potential(constant_edge_field(lattice), lattice)
    assert all(v == 0 for v in phi.values.values())


def test_endpoint_potential_recovers_gauge_anchored():
    rng = random.Random(36)
    p = random_poset(rng, 6)
    lattice = build_lattice(p, 0, 6)
    g, phi0 = random_gradient(rng, lattice)
    phi = endpoint_potential(g, lattice)
    for mask in lattice.nodes:
        assert phi[mask] == phi0[mask] - phi0[0]


def test_endpoint_potential_chain_example():
    p = parse_poset("elem a\nelem b\ncover a b\n")
    lattice = build_lattice(p, 0, 2)
    g = EdgeField({(0, 0): 2, (1, 1): 4})
    phi = endpoint_potential(g, lattice)
    assert phi.values == {0: 0.0, 1: 2, 3: 6}


def test_endpoint_potential_rejects_curved(b2):
    _, lattice, g = b2
    with pytest.raises(PreconditionError, match="curvature"):
        endpoint_potential(g, lattice)


def test_gradient_round_trip():
    rng = random.Random(37)
    for _ in range(20):
        p = random_poset(rng, 6)
        lattice = build_lattice(p, 0, 6)
        g, _ = random_gradient(rng, lattice)
        phi = endpoint_potential(g, lattice)
        for mask, a in lattice.edge_list:
            assert abs(g[(mask, a)] - (phi[mask | 1 << a] - phi[mask])) <= 1e-9


def test_reference_score(b2):
    p, _, g = b2
    assert reference_score(g, p, 0, 0) == 0
    assert reference_score(g, p, 0, 3) == 4


def test_reference_score_chain():
    p = parse_poset("elem a\nelem b\ncover a b\n")
    lattice = build_lattice(p, 0, 2)
    g = EdgeField({(0, 0): 2, (1, 1): 4})
    assert reference_score(g, p, 0, 3) == 6


def test_decompose_reference_is_trivial(b2):
    _, lattice, g = b2
    dec = decompose(g, lattice, Path(0, (0, 1)))
    assert dec.corrections == ()
    assert dec.total == dec.ref_score == 4


def test_decompose_b2(b2):
    _, lattice, g = b2
    dec = decompose(g, lattice, Path(0, (1, 0)))
    assert dec.ref_score == 4
    assert [(s, k) for _, s, k in dec.corrections] == [(1, 3)]
    assert dec.total == 7 == path_value(g, Path(0, (1, 0)))


def test_decompose_exact_on_random_integer_fields():
    rng = random.Random(38)
    for _ in range(40):
        p = random_poset(rng, rng.randint(2, 6))
        lattice = build_lattice(p, 0, p.n)
        g = random_int_field(rng, lattice)
        end = rng.choice(lattice.nodes)
        for q in enumerate_paths(lattice, 0, end, enum_cap=6):
            dec = decompose(g, lattice, q)
            assert dec.total == path_value(g, q)  # exact integers


def test_swap_sum_identity_exact():
    rng = random.Random(39)
    for _ in range(40):
        p = random_poset(rng, rng.randint(2, 6))
        lattice = build_lattice(p, 0, p.n)
        g = random_int_field(rng, lattice)
        end = rng.choice(lattice.nodes)
        paths = enumerate_paths(lattice, 0, end, enum_cap=6)
        if len(paths) < 2:
            continue
        src, dst = rng.sample(paths, 2)
        seq = rewrite_sequence(lattice, src, dst)
        delta = sum(st.sign * curvature(g, st.diamond) for st in seq.steps)
        assert path_value(g, dst) - path_value(g, src) == delta
