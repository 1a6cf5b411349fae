import logging
import os
import sys

# Allow running the suite from a source checkout without installing.
_SRC = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src")
if _SRC not in sys.path:
    sys.path.insert(0, _SRC)

# Dropped-statement warnings are part of the builder contract but drown test
# output when corpora contain bare declarations on purpose.
logging.getLogger("eventclone.eventgraph").setLevel(logging.ERROR)
