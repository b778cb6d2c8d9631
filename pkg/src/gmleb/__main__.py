import sys
from gmleb.cli import main
sys.exit(main())
