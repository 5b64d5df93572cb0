"""Configure Django for running the test suite under pytest."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'auditproject.settings')
django.setup()
