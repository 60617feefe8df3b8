"""Infinite-order elements built stage by stage inside a branching subgroup.

Each stage multiplies in a graft of the seed at the end of the current orbit
path; the stage-k element has order 2^k on its certifying level.
"""
import numpy as np

from arbor import machine as mc
from arbor.permquot import perm_order
from arbor.zoo import Witness, grigorchuk_K, siegenthaler_K


def main():
    for K in (siegenthaler_K([(1, 0)]), grigorchuk_K()):
        w = Witness(K.gens[0])
        print(f"seed {K.name}:")
        for k in range(1, 9):
            L = w.certifying_level(k)
            o = perm_order(np.asarray(mc.level_perm(w.stage_expr(k), L)))
            print(f"  stage {k}: level {L:2d}, order {o}")


if __name__ == "__main__":
    main()
