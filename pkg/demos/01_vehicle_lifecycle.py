"""
A vehicle's life in a small network
===================================

Enroll a car, buy a day of tokens, swap one token per window for a pseudonym
certificate at the nearest road-side unit, and talk to a neighbour. Then
clone the car's tokens into a second region and watch the backend lock it
out. Everything runs in one process over framed loopback links.
"""

from tvss.deployment import Deployment, region_id
from tvss.sim.fullstack import run_clone_scenario

# two regions with one RSU each, 15 minute windows, seeded key material
dep = Deployment(seed=1, t_minutes=15, regions=2)
alice, bob = dep.new_vehicle(), dep.new_vehicle()

# tokens for the next 96 windows (one day)
for car in (alice, bob):
    dep.issue_tokens(car, 96)
print("tokens held:", len(alice.tokens), len(bob.tokens))

# each window the OBU trades that window's token for a fresh PC
rsu = dep.rsus_in(region_id(0))[0]
for car in (alice, bob):
    print("refresh:", car.refresh_pc(rsu.pseudo))

# V2V: signed with the PC key, checked against region, window and PCRL
msg = alice.broadcast(b"hard braking ahead")
print("bob receives:", bob.receive(msg).value)

# a second refresh in the same window keeps the old PC
print("again:", alice.refresh_pc(rsu.pseudo))

# an hour later the old PC has expired and a new token is due
dep.advance_time(3600)
print("stale message now:", bob.receive(msg).value)
print("refresh after an hour:", alice.refresh_pc(rsu.pseudo))

# the clone scenario: one token redeemed in two regions in the same window
run = run_clone_scenario(seed=3)
print("clone detected:", run.detected, "after", run.detect_ticks, "report cycle(s)")
print("blacklisted everywhere after", run.blacklist_ticks, "ticks;",
      "escapes:", run.escapes, "of", run.attempts_after, "attempts")
print("TBL size per RSU:", run.tbl_sizes)
