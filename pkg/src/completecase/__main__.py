import sys

from completecase.cli import main

sys.exit(main())
