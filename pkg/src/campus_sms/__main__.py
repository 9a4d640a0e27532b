import sys

from campus_sms.cli import main

sys.exit(main())
