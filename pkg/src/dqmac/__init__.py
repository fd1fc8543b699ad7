"""Multi-user deep Q-learning over a slotted multichannel random-access medium.

Subpackages:
  env        slot-synchronous medium simulator (cliques, ACK-only feedback)
  rewards    competitive and fairness-utility rewards, discounted sums
  nn         numpy network core: LSTM + dueling heads, BPTT, Adam, checkpoints
  agent      observation encoding and the softmax exploration policy
  trainer    centralized common-training loop with double-Q targets
  baseline   slotted-Aloha reference policies
  gametheory brute-force equilibrium / Pareto / fairness-optimum oracles
  metrics    channel-usage accounting and allocation classification
  harness    experiment scenarios, evaluation, sweeps, file outputs
"""

__version__ = "0.1.0"
