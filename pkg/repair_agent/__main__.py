import sys
from repair_agent.cli import main

sys.exit(main())
