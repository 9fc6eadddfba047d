import sys

from auto_distractor.cli import main


if __name__ == "__main__":
    sys.exit(main())
