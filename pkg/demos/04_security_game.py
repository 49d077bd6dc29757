"""
Playing the security game
=========================

A challenger runs a real CA and RSU. The adversary creates vehicles,
collects tokens and PCs, and then tries to forge a V2V message, tell which
of two cars got a PC, or link two PCs across windows.
"""

from tvss.game import Challenger, anonymity_guesses, run_game

# one game by hand
ch = Challenger(seed=5)
a, b = ch.create_vehicle(), ch.create_vehicle()
ch.get_pc(a)
ch.get_pc(b)
pc = ch.anonymity_challenge(a, b)
guesses = anonymity_guesses(pc, ch.vehicles[a].ec, ch.vehicles[b].ec)
print("distinguisher opinions:", guesses)
print("structural scan findings:", ch.scan())

# many games: no distinguisher fires, so guessing is a coin flip
for r in run_game(trials=400, seed=1):
    lo, hi = r.ci95()
    print(f"{r.branch:14s} wins {r.wins:4d}/{r.trials} rate {r.rate:.3f} "
          f"[{lo:.3f}, {hi:.3f}] scan violations {r.scan_violations}")
