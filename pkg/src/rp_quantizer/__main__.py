"""
python -m rp_quantizer
"""

from .cli import main

if __name__ == "__main__":
    main()
