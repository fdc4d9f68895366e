"""Ghost-keystroke password entry defense.

The package has three layers:

* entry-side: a keyboard layout model, a character-level Markov model, a
  calibrated randomness meter, and the adaptive ghost injection engine
  (`ghostkeys.generator`);
* server-side: a Bloom-filter honeyword detector and credential store
  (`ghostkeys.detector`) plus a line-oriented TCP auth service
  (`ghostkeys.service`);
* evaluation: an eavesdropper simulation and guessing oracle
  (`ghostkeys.attack`) used to measure how well the injected noise holds up.
"""

__version__ = "0.1.0"
