import sys

from backscatter_sim.main import main

sys.exit(main())
