"""How many orders a block producer can choose, and why the full schedule is not the worst case."""

from shortleash.winkle import (
    INDEPENDENT, SINGLE, acceptable_schedules, adversary_amounts, amounts_over_all_schedules, count_table,
    parity_fixture,
)

print(f"{'k':>2} {'one sender':>11} {'k senders':>10} {'ceil(k!e)':>10}")
for (k, single, _), (_, indep, ceil) in zip(count_table(8, SINGLE), count_table(8, INDEPENDENT)):
    print(f"{k:>2} {single:>11} {indep:>10} {ceil:>10}")

# Bob deposits 3 into a contract holding 2,000,000; Alice then asks it to pay Cobb.
# The contract pays 1,000,000 from an even balance and 1 from an odd one.
fx = parity_fixture()
names = {fx.t1: "t1", fx.t2: "t2"}
for schedule in acceptable_schedules(fx.base):
    got = adversary_amounts(schedule, fx.db, fx.adversary).received
    print(f"{'(' + ','.join(names[t] for t in schedule) + ')':<8} Cobb receives {got}")

ext = amounts_over_all_schedules(fx.base, fx.db, fx.adversary)
full = adversary_amounts(fx.base, fx.db, fx.adversary).received
print(f"worst case {ext.max_received} vs full schedule {full}")
