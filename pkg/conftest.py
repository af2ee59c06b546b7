import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'Fractal_Zeta.test_settings')
django.setup()
